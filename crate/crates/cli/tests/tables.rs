use wormhole::commands::{run_study, study_checks, write_study_tables};
use wormhole::config::{builtin, CaseName};
use wormhole::table::FieldTable;

#[test]
fn pressure_table_has_three_widths_and_two_columns_per_degree() {
    let cfg = builtin(CaseName::PressureElliptic, None);
    let r = run_study(&cfg, 3, |_| {}).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let paths = write_study_tables(dir.path(), &r).unwrap();
    let names: Vec<String> = paths
        .iter()
        .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
        .collect();
    assert_eq!(
        names,
        [
            "pressure_elliptic_p.csv",
            "pressure_elliptic_p_display.csv",
            "pressure_elliptic_u.csv",
            "pressure_elliptic_u_display.csv",
        ]
    );

    let text = std::fs::read_to_string(&paths[0]).unwrap();
    let mut rd = csv::Reader::from_reader(text.as_bytes());
    let header = rd.headers().unwrap().clone();
    assert_eq!(header.len(), 2 + 6);
    let rows: Vec<_> = rd.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 3);
    for (i, row) in rows.iter().enumerate() {
        for k in 0..3 {
            assert!(!row[2 + 2 * k].is_empty());
            assert_eq!(row[3 + 2 * k].is_empty(), i == 0);
        }
    }

    let shown = std::fs::read_to_string(&paths[1]).unwrap();
    assert_eq!(shown.lines().next(), text.lines().next());
    assert_eq!(shown.lines().count(), 4);
    let first_error = shown
        .lines()
        .nth(1)
        .unwrap()
        .split(',')
        .nth(2)
        .unwrap()
        .to_string();
    assert_eq!(
        first_error.split('e').next().unwrap().len(),
        6,
        "{first_error}"
    );

    let back = FieldTable::read_csv("p", text.as_bytes()).unwrap();
    assert_eq!(back, FieldTable::from_study(&r, "p").unwrap());
    for (row, study_row) in back.rows.iter().zip(r.rows_for(1)) {
        assert_eq!(row.values[1].0, study_row.errors.p);
    }

    // k = 0 and k = 1 meet the reference table; k = 2 is the known gap.
    let checks = study_checks(&cfg, &r);
    let table = checks.iter().find(|c| c.name == "reference table").unwrap();
    assert!(
        !table.detail.contains("k=0") && !table.detail.contains("k=1"),
        "{}",
        table.detail
    );
}

#[test]
fn a_single_width_has_no_rates() {
    let mut cfg = builtin(CaseName::PressureElliptic, None);
    cfg.mesh.cells = Some(vec![4]);
    cfg.discretization.degrees = Some(vec![0, 1]);
    let r = run_study(&cfg, 1, |_| {}).unwrap();
    let t = FieldTable::from_study(&r, "u").unwrap();
    assert_eq!(t.rows.len(), 1);
    assert!(t.rows[0]
        .values
        .iter()
        .all(|(e, r)| e.is_some() && r.is_none()));
    let mut buf = Vec::new();
    t.write_csv(&mut buf).unwrap();
    let line = String::from_utf8(buf)
        .unwrap()
        .lines()
        .nth(1)
        .unwrap()
        .to_string();
    assert!(line.ends_with(','), "{line}");
}

#[test]
fn thread_count_does_not_change_the_result() {
    let mut cfg = builtin(CaseName::Coupled, None);
    cfg.mesh.cells = Some(vec![2, 3, 4]);
    cfg.discretization.degrees = Some(vec![0, 1]);
    cfg.discretization.dt = Some(0.01);
    cfg.discretization.final_time = Some(0.03);
    let a = run_study(&cfg, 1, |_| {}).unwrap();
    let b = run_study(&cfg, 4, |_| {}).unwrap();
    assert_eq!(a.rows.len(), 6);
    for (x, y) in a.rows.iter().zip(&b.rows) {
        assert_eq!((x.k, x.cells), (y.k, y.cells));
        assert_eq!(x.errors, y.errors);
        assert_eq!(x.rates, y.rates);
    }
}
