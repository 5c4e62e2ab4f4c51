//! Field snapshots: legacy ASCII VTK and CSV point clouds.
//!
//! VTK output is an unstructured grid of triangles. Piecewise constants go
//! out as cell data on the shared mesh vertices. Higher degrees are
//! discontinuous, so every triangle gets its own copy of its three vertices
//! and the fields are written as point data evaluated at them.

use std::io::{BufRead, Write};

use anyhow::{bail, Context, Result};

use wormhole_core::basis::ReferenceElement;
use wormhole_core::fields::DgField;
use wormhole_core::{Mesh, Point};

const VTK_TRIANGLE: u8 = 5;
const CORNERS: [Point; 3] = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];

/// Writes `fields` (all of one degree) as one VTK dataset.
pub fn write_vtk<W: Write>(
    mut w: W,
    mesh: &Mesh,
    title: &str,
    fields: &[(&str, &DgField)],
) -> Result<()> {
    let k = fields.first().map_or(0, |f| f.1.degree());
    if fields.iter().any(|f| f.1.degree() != k) {
        bail!("fields of mixed degree");
    }
    let tris = mesh.triangles();
    let nt = tris.len();
    writeln!(w, "# vtk DataFile Version 3.0")?;
    writeln!(w, "{}", title.replace('\n', " "))?;
    writeln!(w, "ASCII")?;
    writeln!(w, "DATASET UNSTRUCTURED_GRID")?;
    if k == 0 {
        let verts = mesh.vertices();
        writeln!(w, "POINTS {} double", verts.len())?;
        for v in verts {
            writeln!(w, "{:e} {:e} 0", v[0], v[1])?;
        }
        writeln!(w, "CELLS {} {}", nt, 4 * nt)?;
        for t in tris {
            writeln!(w, "3 {} {} {}", t[0], t[1], t[2])?;
        }
    } else {
        writeln!(w, "POINTS {} double", 3 * nt)?;
        for t in tris {
            for &v in t {
                let x = mesh.vertices()[v];
                writeln!(w, "{:e} {:e} 0", x[0], x[1])?;
            }
        }
        writeln!(w, "CELLS {} {}", nt, 4 * nt)?;
        for t in 0..nt {
            writeln!(w, "3 {} {} {}", 3 * t, 3 * t + 1, 3 * t + 2)?;
        }
    }
    writeln!(w, "CELL_TYPES {nt}")?;
    for _ in 0..nt {
        writeln!(w, "{VTK_TRIANGLE}")?;
    }
    if fields.is_empty() {
        return Ok(());
    }
    if k == 0 {
        writeln!(w, "CELL_DATA {nt}")?;
    } else {
        writeln!(w, "POINT_DATA {}", 3 * nt)?;
    }
    let re = ReferenceElement::new(k, 1)?;
    for (name, f) in fields {
        f.check_mesh(mesh)?;
        writeln!(w, "SCALARS {name} double 1")?;
        writeln!(w, "LOOKUP_TABLE default")?;
        for t in 0..nt {
            if k == 0 {
                writeln!(w, "{:e}", f.block(t)[0])?;
            } else {
                for xi in CORNERS {
                    writeln!(w, "{:e}", f.value(&re, t, xi))?;
                }
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Writes element centroids and the fields' element means.
pub fn write_csv_points<W: Write>(w: W, mesh: &Mesh, fields: &[(&str, &DgField)]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let mut header = vec!["x".to_string(), "y".to_string()];
    header.extend(fields.iter().map(|f| f.0.to_string()));
    out.write_record(&header)?;
    let res = fields
        .iter()
        .map(|f| ReferenceElement::new(f.1.degree(), f.1.degree().max(1)))
        .collect::<wormhole_core::Result<Vec<_>>>()?;
    for t in 0..mesh.n_elements() {
        let x = mesh.geometry(t).centroid();
        let mut rec = vec![format!("{:.16e}", x[0]), format!("{:.16e}", x[1])];
        for ((_, f), re) in fields.iter().zip(&res) {
            rec.push(format!("{:.16e}", f.element_mean(re, t)));
        }
        out.write_record(&rec)?;
    }
    out.flush()?;
    Ok(())
}

/// What [`read_vtk`] recovers from a file written by [`write_vtk`].
#[derive(Clone, Debug, Default, PartialEq)]
pub struct VtkData {
    pub points: Vec<[f64; 3]>,
    pub cells: Vec<Vec<usize>>,
    pub cell_types: Vec<u8>,
    pub cell_data: Vec<(String, Vec<f64>)>,
    pub point_data: Vec<(String, Vec<f64>)>,
}

/// Minimal reader for legacy ASCII unstructured grids with scalar data.
pub fn read_vtk<R: BufRead>(r: R) -> Result<VtkData> {
    let mut lines = r.lines();
    let mut next = || -> Result<Option<String>> {
        loop {
            match lines.next() {
                None => return Ok(None),
                Some(l) => {
                    let l = l?;
                    if !l.trim().is_empty() {
                        return Ok(Some(l));
                    }
                }
            }
        }
    };
    let magic = next()?.context("empty file")?;
    if !magic.starts_with("# vtk DataFile") {
        bail!("not a legacy VTK file");
    }
    next()?.context("missing title")?;
    if next()?.as_deref().map(str::trim) != Some("ASCII") {
        bail!("only ASCII files are read");
    }
    if next()?.as_deref().map(str::trim) != Some("DATASET UNSTRUCTURED_GRID") {
        bail!("only unstructured grids are read");
    }
    let mut out = VtkData::default();
    // Which data section the next SCALARS belongs to, and its length.
    let mut section: Option<(bool, usize)> = None;
    while let Some(line) = next()? {
        let words: Vec<&str> = line.split_whitespace().collect();
        let count = |i: usize| -> Result<usize> {
            words
                .get(i)
                .and_then(|s| s.parse().ok())
                .with_context(|| format!("bad count in {line:?}"))
        };
        match words[0] {
            "POINTS" => {
                for _ in 0..count(1)? {
                    let l = next()?.context("truncated POINTS")?;
                    let v = parse_floats(&l)?;
                    if v.len() != 3 {
                        bail!("point needs 3 coordinates: {l:?}");
                    }
                    out.points.push([v[0], v[1], v[2]]);
                }
            }
            "CELLS" => {
                for _ in 0..count(1)? {
                    let l = next()?.context("truncated CELLS")?;
                    let ids: Vec<usize> = l
                        .split_whitespace()
                        .map(|s| s.parse().context("bad index"))
                        .collect::<Result<_>>()?;
                    if ids.first() != Some(&(ids.len() - 1)) {
                        bail!("cell length mismatch: {l:?}");
                    }
                    out.cells.push(ids[1..].to_vec());
                }
            }
            "CELL_TYPES" => {
                for _ in 0..count(1)? {
                    let l = next()?.context("truncated CELL_TYPES")?;
                    out.cell_types
                        .push(l.trim().parse().context("bad cell type")?);
                }
            }
            "CELL_DATA" => section = Some((true, count(1)?)),
            "POINT_DATA" => section = Some((false, count(1)?)),
            "SCALARS" => {
                let (is_cell, n) = section.context("SCALARS outside a data section")?;
                let name = words.get(1).context("unnamed SCALARS")?.to_string();
                let lut = next()?.context("missing LOOKUP_TABLE")?;
                if !lut.starts_with("LOOKUP_TABLE") {
                    bail!("expected LOOKUP_TABLE, got {lut:?}");
                }
                let mut vals = Vec::with_capacity(n);
                while vals.len() < n {
                    let l = next()?.context("truncated SCALARS")?;
                    vals.extend(parse_floats(&l)?);
                }
                if is_cell {
                    out.cell_data.push((name, vals));
                } else {
                    out.point_data.push((name, vals));
                }
            }
            other => bail!("unsupported keyword {other}"),
        }
    }
    Ok(out)
}

fn parse_floats(l: &str) -> Result<Vec<f64>> {
    l.split_whitespace()
        .map(|s| s.parse().with_context(|| format!("bad number {s:?}")))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use wormhole_core::fields::l2_project_element;
    use wormhole_core::Rect;

    #[test]
    fn linear_field_survives_at_the_corners() {
        let mesh = Mesh::build_uniform(2, 3, Rect::UNIT).unwrap();
        let f = l2_project_element(&|x| 2.0 * x[0] - x[1] + 0.25, &mesh, 1).unwrap();
        let mut buf = Vec::new();
        write_vtk(&mut buf, &mesh, "t", &[("f", &f)]).unwrap();
        let d = read_vtk(&buf[..]).unwrap();
        assert_eq!(d.points.len(), 3 * mesh.n_elements());
        assert!(d.cell_data.is_empty());
        for (p, v) in d.points.iter().zip(&d.point_data[0].1) {
            assert!((v - (2.0 * p[0] - p[1] + 0.25)).abs() < 1e-12);
        }
    }
}
