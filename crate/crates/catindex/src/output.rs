//! CSV and SVG emission for solved surfaces and verification reports.
//!
//! CSV is locale-independent: dot decimal separator, `\n` line endings,
//! every numeric field in fixed scientific notation with 10 significant
//! digits. The SVG writer is deliberately minimal — one polyline per stored
//! time slice over axes labeled in millions, lighter strokes for earlier
//! times.

use std::io::Write;

use crate::error::Result;
use crate::simulate::VerifyRow;

/// 10 significant digits, fixed scientific notation.
pub fn fmt_sci(v: f64) -> String {
    format!("{v:.9e}")
}

/// Rows of (c, t, value) for one surface-like quantity on the lattice.
pub struct SurfaceTable {
    /// Stored times, any order; rows are emitted per time then per node.
    pub times: Vec<f64>,
    /// nodes[i] = i * delta.
    pub delta: f64,
    /// values[slice][node], aligned with `times`.
    pub values: Vec<Vec<f64>>,
}

impl SurfaceTable {
    pub fn n_rows(&self) -> usize {
        self.values.iter().map(Vec::len).sum()
    }

    pub fn write_csv(&self, out: &mut dyn Write) -> Result<()> {
        out.write_all(b"c,t,value\n")?;
        for (slice, &t) in self.values.iter().zip(&self.times) {
            for (i, &v) in slice.iter().enumerate() {
                let c = i as f64 * self.delta;
                writeln!(out, "{},{},{}", fmt_sci(c), fmt_sci(t), fmt_sci(v))?;
            }
        }
        Ok(())
    }

    /// One polyline per stored slice. Earlier times are drawn lighter, the
    /// latest slice is black.
    pub fn write_svg(&self, out: &mut dyn Write) -> Result<()> {
        const W: f64 = 800.0;
        const H: f64 = 520.0;
        const ML: f64 = 70.0; // left margin
        const MB: f64 = 50.0; // bottom margin
        const MT: f64 = 20.0;
        const MR: f64 = 20.0;

        let c_max = self.delta * (self.values[0].len().saturating_sub(1).max(1)) as f64;
        let (mut v_min, mut v_max) = (f64::INFINITY, f64::NEG_INFINITY);
        for slice in &self.values {
            for &v in slice {
                v_min = v_min.min(v);
                v_max = v_max.max(v);
            }
        }
        if v_max - v_min < 1e-30 {
            v_max = v_min + 1.0;
        }
        let sx = |c: f64| ML + (c / c_max) * (W - ML - MR);
        let sy = |v: f64| H - MB - (v - v_min) / (v_max - v_min) * (H - MB - MT);

        writeln!(
            out,
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" \
             viewBox=\"0 0 {W} {H}\">"
        )?;
        writeln!(
            out,
            "  <rect width=\"{W}\" height=\"{H}\" fill=\"white\"/>\n  \
             <line x1=\"{ML}\" y1=\"{y0}\" x2=\"{x1}\" y2=\"{y0}\" stroke=\"black\"/>\n  \
             <line x1=\"{ML}\" y1=\"{MT}\" x2=\"{ML}\" y2=\"{y0}\" stroke=\"black\"/>",
            y0 = H - MB,
            x1 = W - MR,
        )?;
        // Axis ticks in millions.
        for i in 0..=6 {
            let c = c_max * i as f64 / 6.0;
            writeln!(
                out,
                "  <text x=\"{:.1}\" y=\"{:.1}\" font-size=\"12\" text-anchor=\"middle\">{:.1}</text>",
                sx(c),
                H - MB + 18.0,
                c / 1e6
            )?;
        }
        for i in 0..=5 {
            let v = v_min + (v_max - v_min) * i as f64 / 5.0;
            writeln!(
                out,
                "  <text x=\"{:.1}\" y=\"{:.1}\" font-size=\"12\" text-anchor=\"end\">{:.2}</text>",
                ML - 6.0,
                sy(v) + 4.0,
                v / 1e6
            )?;
        }
        writeln!(
            out,
            "  <text x=\"{:.1}\" y=\"{:.1}\" font-size=\"13\" text-anchor=\"middle\">index level (millions)</text>",
            (ML + W - MR) / 2.0,
            H - 10.0
        )?;

        // Slice order by time: earliest first and lightest.
        let mut order: Vec<usize> = (0..self.times.len()).collect();
        order.sort_by(|&a, &b| self.times[a].partial_cmp(&self.times[b]).unwrap());
        let n = order.len().max(2);
        for (rank, &si) in order.iter().enumerate() {
            let shade = 200 - (rank * 200) / (n - 1);
            let pts: Vec<String> = self.values[si]
                .iter()
                .enumerate()
                .map(|(i, &v)| format!("{:.2},{:.2}", sx(i as f64 * self.delta), sy(v)))
                .collect();
            writeln!(
                out,
                "  <polyline fill=\"none\" stroke=\"rgb({shade},{shade},{shade})\" points=\"{}\"/>",
                pts.join(" ")
            )?;
        }
        writeln!(out, "</svg>")?;
        Ok(())
    }
}

/// Verification table: quantity, estimate, std_error, analytic, z_score.
pub fn write_verify_csv(rows: &[VerifyRow], out: &mut dyn Write) -> Result<()> {
    out.write_all(b"quantity,estimate,std_error,analytic,z_score\n")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{}",
            r.quantity,
            fmt_sci(r.estimate),
            fmt_sci(r.std_error),
            fmt_sci(r.analytic),
            fmt_sci(r.z_score)
        )?;
    }
    Ok(())
}
