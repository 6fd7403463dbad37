//! CSV tables and static SVG portraits.

use std::fmt::Write as _;
use std::io::Write;

use thiserror::Error;

use crate::dynamics::{OrbitRecord, PortraitOrbit};
use crate::geom::PlanarVector;
use crate::outer::OuterStep;
use crate::report::fmt_f64;
use crate::scalar::Real;

#[derive(Debug, Error)]
pub enum IoError {
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub const ORBIT_COLUMNS: [&str; 12] = [
    "step",
    "t_impact",
    "qx",
    "qy",
    "vx_out",
    "vy_out",
    "cx_before",
    "cy_before",
    "cx_after",
    "cy_after",
    "arc_angle",
    "integral_value",
];
pub const PORTRAIT_COLUMNS: [&str; 6] = ["orbit_id", "step", "cx", "cy", "t_impact", "tangential_velocity"];
pub const OUTER_COLUMNS: [&str; 6] = ["step", "px", "py", "s_tangency", "ox", "oy"];

fn num<T: Real>(v: T) -> String {
    fmt_f64(v.as_f64())
}

/// One row per impact; `integral_value` is left empty when no integral was tracked.
pub fn write_orbit_csv<T: Real, W: Write>(out: W, records: &[OrbitRecord<T>]) -> Result<(), IoError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(ORBIT_COLUMNS)?;
    for rec in records {
        let i = &rec.impact;
        w.write_record([
            rec.step.to_string(),
            num(i.t),
            num(i.q.x),
            num(i.q.y),
            num(i.v_out.x),
            num(i.v_out.y),
            num(i.center_before.x),
            num(i.center_before.y),
            num(i.center_after.x),
            num(i.center_after.y),
            num(i.arc_angle),
            rec.integral_value.map(num).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_portrait_csv<T: Real, W: Write>(out: W, orbits: &[PortraitOrbit<T>]) -> Result<(), IoError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(PORTRAIT_COLUMNS)?;
    for orbit in orbits {
        for p in &orbit.points {
            w.write_record([
                orbit.id.to_string(),
                p.step.to_string(),
                num(p.center.x),
                num(p.center.y),
                num(p.t_impact),
                num(p.tangential_velocity),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Rows are numbered from 1; each holds the image point and the tangency used to reach it.
pub fn write_outer_csv<T: Real, W: Write>(out: W, steps: &[OuterStep<T>]) -> Result<(), IoError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(OUTER_COLUMNS)?;
    for (k, st) in steps.iter().enumerate() {
        w.write_record([
            (k + 1).to_string(),
            num(st.image.x),
            num(st.image.y),
            num(st.s),
            num(st.center.x),
            num(st.center.y),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Static SVG: the boundary as a closed polyline and one group of dots per orbit.
///
/// The view box is the given bounding box of `Ω_r` with a 5% margin, y pointing up.
pub fn portrait_svg<T: Real>(
    orbits: &[PortraitOrbit<T>],
    boundary: &[PlanarVector<T>],
    bounds: (PlanarVector<T>, PlanarVector<T>),
) -> String {
    let (lo, hi) = (bounds.0, bounds.1);
    let (w, h) = ((hi.x - lo.x).as_f64(), (hi.y - lo.y).as_f64());
    let pad = 0.05 * w.max(h);
    let (x0, y0) = (lo.x.as_f64() - pad, -hi.y.as_f64() - pad);
    let (vw, vh) = (w + 2.0 * pad, h + 2.0 * pad);
    let dot = 0.002 * vw.max(vh);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="{x0:.6} {y0:.6} {vw:.6} {vh:.6}" width="800" height="{:.0}">"#,
        800.0 * vh / vw
    );
    let _ = writeln!(s, r#"<rect x="{x0:.6}" y="{y0:.6}" width="{vw:.6}" height="{vh:.6}" fill="white"/>"#);
    if !boundary.is_empty() {
        let pts: Vec<String> =
            boundary.iter().map(|p| format!("{:.6},{:.6}", p.x.as_f64(), -p.y.as_f64())).collect();
        let _ = writeln!(
            s,
            r#"<polygon points="{}" fill="none" stroke="black" stroke-width="{:.6}"/>"#,
            pts.join(" "),
            dot
        );
    }
    for orbit in orbits {
        // golden-angle hue spacing keeps neighbouring ids distinguishable
        let hue = (orbit.id as f64 * 137.507_764) % 360.0;
        let _ = writeln!(s, r#"<g id="orbit-{}" fill="hsl({hue:.1},70%,40%)">"#, orbit.id);
        for p in &orbit.points {
            let _ = writeln!(
                s,
                r#"<circle cx="{:.6}" cy="{:.6}" r="{dot:.6}"/>"#,
                p.center.x.as_f64(),
                -p.center.y.as_f64()
            );
        }
        s.push_str("</g>\n");
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{phase_portrait, LarmorState, MagneticBilliard};
    use crate::geom::{Boundary, Circle, MagneticParams};

    fn billiard() -> MagneticBilliard<f64, Circle<f64>> {
        MagneticBilliard::new(Circle::centered(2.0), MagneticParams::new(1.0 / 3.0).unwrap()).unwrap()
    }

    #[test]
    fn orbit_csv_shape() {
        let b = billiard();
        let start = LarmorState::from_angle(PlanarVector::new(2.0, 0.0), 1.83);
        let orbit = b.orbit(start, 5, None);
        let mut buf = Vec::new();
        write_orbit_csv(&mut buf, &orbit.records).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 6);
        assert_eq!(lines[0], ORBIT_COLUMNS.join(","));
        assert!(lines[1..].iter().all(|l| l.split(',').count() == 12));
        assert!(lines[1].ends_with(','));
    }

    #[test]
    fn portrait_outputs() {
        let b = billiard();
        let orbits = phase_portrait(&b, 3, 4, 0);
        let mut buf = Vec::new();
        write_portrait_csv(&mut buf, &orbits).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 1 + 12);
        let outline: Vec<_> = (0..64).map(|i| b.boundary().eval(i as f64 * 0.1)).collect();
        let svg = portrait_svg(&orbits, &outline, b.phase_space_bounds());
        assert_eq!(svg.matches("<g id=").count(), 3);
        assert_eq!(svg.matches("<circle").count(), 12);
        assert!(!svg.contains("<script"));
    }

    #[test]
    fn empty_tables_have_headers() {
        let mut buf = Vec::new();
        write_outer_csv::<f64, _>(&mut buf, &[]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().trim(), OUTER_COLUMNS.join(","));
    }
}
