use std::io::{self, Write};

use super::mesh::{Mesh, NodalField};

/// Writes a nodal field as plain text: a `#` header with the mesh metadata,
/// then one `x y value` line per node in row-major order.
pub fn write_field_text<W: Write>(out: &mut W, mesh: &Mesh, name: &str, field: &NodalField) -> io::Result<()> {
    write_header(out, mesh, name)?;
    for (p, v) in mesh.nodes().iter().zip(field.values()) {
        writeln!(out, "{} {} {}", fmt17(p[0]), fmt17(p[1]), fmt17(*v))?;
    }
    Ok(())
}

/// Same content as [`write_field_text`] as comma-separated values.
pub fn write_field_csv<W: Write>(out: &mut W, mesh: &Mesh, name: &str, field: &NodalField) -> io::Result<()> {
    writeln!(out, "x,y,{name}")?;
    for (p, v) in mesh.nodes().iter().zip(field.values()) {
        writeln!(out, "{},{},{}", fmt17(p[0]), fmt17(p[1]), fmt17(*v))?;
    }
    Ok(())
}

fn write_header<W: Write>(out: &mut W, mesh: &Mesh, name: &str) -> io::Result<()> {
    let r = mesh.rect();
    writeln!(out, "# field = {name}")?;
    writeln!(out, "# nx = {}", mesh.nx())?;
    writeln!(out, "# ny = {}", mesh.ny())?;
    writeln!(out, "# rect = {} {} {} {}", fmt17(r.xmin), fmt17(r.xmax), fmt17(r.ymin), fmt17(r.ymax))?;
    writeln!(out, "# h = {}", fmt17(mesh.h()))?;
    writeln!(out, "# columns = x y value")
}

/// Reads back a field written by [`write_field_text`]; returns the values.
pub fn read_field_text(text: &str) -> Result<Vec<f64>, String> {
    let mut values = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = line.split_whitespace().collect();
        if cols.len() != 3 {
            return Err(format!("line {}: expected 3 columns", lineno + 1));
        }
        let v = cols[2]
            .parse::<f64>()
            .map_err(|e| format!("line {}: {e}", lineno + 1))?;
        values.push(v);
    }
    Ok(values)
}

/// Fixed float formatting with 17 significant digits.
pub fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}
