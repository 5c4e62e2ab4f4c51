use std::fs::File;
use std::io::BufReader;

use wormhole::commands::wormhole_command;
use wormhole::config::parse_config_str;
use wormhole::snapshot::{read_vtk, write_vtk};
use wormhole_core::fields::{l2_project_element, DgField};
use wormhole_core::{Mesh, Rect};

#[test]
fn two_triangles_give_two_cell_values() {
    let mesh = Mesh::build_uniform(1, 1, Rect::UNIT).unwrap();
    assert_eq!(mesh.n_elements(), 2);
    let f = DgField::constant(&mesh, 0, 0.375);
    let mut buf = Vec::new();
    write_vtk(&mut buf, &mesh, "constant", &[("f", &f)]).unwrap();
    let d = read_vtk(&buf[..]).unwrap();
    assert_eq!(d.points.len(), 4);
    assert_eq!(d.cells.len(), 2);
    assert_eq!(d.cell_types, [5, 5]);
    assert_eq!(d.cell_data, [("f".to_string(), vec![0.375, 0.375])]);
    assert!(d.point_data.is_empty());
}

#[test]
fn piecewise_constant_round_trip_on_the_unit_square() {
    let mesh = Mesh::build_uniform(6, 5, Rect::UNIT).unwrap();
    let f = l2_project_element(&|x| (3.0 * x[0]).sin() + x[1] / 7.0, &mesh, 0).unwrap();
    let g = DgField::constant(&mesh, 0, -1.0 / 3.0);
    let mut buf = Vec::new();
    write_vtk(&mut buf, &mesh, "two fields", &[("f", &f), ("g", &g)]).unwrap();
    let d = read_vtk(&buf[..]).unwrap();
    for (p, v) in d.points.iter().zip(mesh.vertices()) {
        assert_eq!([p[0], p[1], p[2]], [v[0], v[1], 0.0]);
    }
    for (c, t) in d.cells.iter().zip(mesh.triangles()) {
        assert_eq!(c[..], t[..]);
    }
    assert_eq!(d.cell_data[0].1, f.coeffs());
    assert_eq!(d.cell_data[1].1, g.coeffs());
}

#[test]
fn short_wormhole_run_writes_bounded_porosity() {
    let dir = tempfile::tempdir().unwrap();
    let text = r#"{
        "case": "wormhole",
        "mesh": { "nx": 8, "ny": 8 },
        "discretization": { "dt": 0.1, "final_time": 0.5 },
        "output": { "snapshot_times": [0.0, 0.5] },
        "checks": { "max_mass_residual": 1e-9 }
    }"#;
    let cfg = parse_config_str(text, "inline").unwrap();
    let out = wormhole_command(&cfg, dir.path(), false).unwrap();
    assert!(out.manifest.pass, "{:?}", out.manifest.checks);
    let vtks: Vec<_> = out
        .manifest
        .outputs
        .iter()
        .filter(|o| o.ends_with(".vtk"))
        .collect();
    assert_eq!(vtks.len(), 2);
    for name in vtks {
        let d = read_vtk(BufReader::new(File::open(dir.path().join(name)).unwrap())).unwrap();
        assert_eq!(d.cells.len(), 128);
        let (_, phi) = d.cell_data.iter().find(|(n, _)| n == "porosity").unwrap();
        assert!(phi.iter().all(|&p| p > 0.0 && p < 1.0));
        assert!(phi.iter().any(|&p| p >= 0.6));
    }
    assert!(out.manifest.outputs.iter().any(|o| o == "steps.csv"));
    assert!(out
        .manifest
        .outputs
        .iter()
        .any(|o| o.ends_with(".csv") && o.starts_with("snapshot")));
    let steps = std::fs::read_to_string(dir.path().join("steps.csv")).unwrap();
    assert_eq!(steps.lines().count(), 1 + 5);
}
