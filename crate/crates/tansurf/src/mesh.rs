//! Mesh and table export of sampled surfaces and geodesics.

use std::io::{self, Write};

use crate::geodesic::GeodesicState;
use crate::surface::SurfacePatch;

/// Write the patch as a Wavefront OBJ mesh: vertices in row-major order
/// (t rows, s columns, 1-based indices), each grid quad split into two
/// triangles. Coordinates carry nine significant digits. Only meaningful
/// for three-dimensional charts.
pub fn write_obj(patch: &SurfacePatch, w: &mut impl Write) -> io::Result<()> {
    let nt = patch.t_grid.len();
    let ns = patch.s_grid.len();
    writeln!(w, "# tangent surface mesh: {nt} x {ns} samples")?;
    for row in &patch.points {
        for p in row {
            writeln!(w, "v {:.8e} {:.8e} {:.8e}", p[0], p[1], p[2])?;
        }
    }
    let vid = |i: usize, j: usize| i * ns + j + 1;
    for i in 0..nt - 1 {
        for j in 0..ns - 1 {
            let (a, b, c, d) = (vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1));
            writeln!(w, "f {a} {b} {c}")?;
            writeln!(w, "f {a} {c} {d}")?;
        }
    }
    Ok(())
}

/// Write the patch as CSV rows `t,s,x1..xm` (the export format for charts
/// of dimension other than three). Values print with shortest round-trip
/// precision.
pub fn write_patch_csv(patch: &SurfacePatch, w: &mut impl Write) -> io::Result<()> {
    let m = patch.points[0][0].len();
    write!(w, "t,s")?;
    for k in 1..=m {
        write!(w, ",x{k}")?;
    }
    writeln!(w)?;
    for (i, &t) in patch.t_grid.iter().enumerate() {
        for (j, &s) in patch.s_grid.iter().enumerate() {
            write!(w, "{t},{s}")?;
            for v in &patch.points[i][j] {
                write!(w, ",{v}")?;
            }
            writeln!(w)?;
        }
    }
    Ok(())
}

/// Write sampled geodesic states as CSV rows `s,x1..xm,v1..vm`.
pub fn write_geodesic_csv(states: &[GeodesicState], w: &mut impl Write) -> io::Result<()> {
    if states.is_empty() {
        return Ok(());
    }
    let m = states[0].pos.len();
    write!(w, "s")?;
    for k in 1..=m {
        write!(w, ",x{k}")?;
    }
    for k in 1..=m {
        write!(w, ",v{k}")?;
    }
    writeln!(w)?;
    for st in states {
        write!(w, "{}", st.s)?;
        for v in &st.pos {
            write!(w, ",{v}")?;
        }
        for v in &st.vel {
            write!(w, ",{v}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}
