//! File formats: pair CSV, transform JSON, PGM masks, evaluation CSV,
//! sweep CSV and an SVG residual plot.

use std::fmt::Write as _;
use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::calib::{ExtrinsicTransform, ImagePoint, IntrinsicMatrix, PointPair, PointPairSet, WorldPoint};
use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::metrics::ErrorReport;
use crate::needle::BinaryMask;
use crate::scalar::Scalar;
use crate::synth::SweepRow;

pub const PAIRS_HEADER: &str = "u,v,x,y,z";

/// Parses a pair CSV. The header `u,v,x,y,z` is mandatory; errors carry the
/// 1-based line number.
pub fn read_pairs_csv<T: Scalar, R: Read>(reader: R) -> Result<PointPairSet<T>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr.headers().map_err(|e| parse_err(1, e.to_string()))?;
    let names: Vec<&str> = header.iter().collect();
    if names != ["u", "v", "x", "y", "z"] {
        return Err(parse_err(
            1,
            format!("expected header `{PAIRS_HEADER}`, got `{}`", names.join(",")),
        ));
    }
    let mut pairs = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            parse_err(line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let mut vals = [0.0f64; 5];
        for (k, field) in rec.iter().enumerate() {
            let x: f64 = field
                .parse()
                .map_err(|_| parse_err(line, format!("`{field}` is not a number")))?;
            if !x.is_finite() {
                return Err(parse_err(line, format!("`{field}` is not finite")));
            }
            vals[k] = x;
        }
        let [u, v, x, y, z] = vals.map(T::lit);
        pairs.push(PointPair::new(ImagePoint::new(u, v), WorldPoint::new(x, y, z)));
    }
    Ok(PointPairSet::new(pairs))
}

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}

/// Canonical pair CSV: header, six decimals, LF endings.
pub fn pairs_to_csv<T: Scalar>(pairs: &PointPairSet<T>) -> String {
    let mut out = String::from(PAIRS_HEADER);
    out.push('\n');
    for p in pairs.iter() {
        let vals = [p.image.u, p.image.v, p.world.x, p.world.y, p.world.z];
        let fields: Vec<String> = vals.iter().map(|x| fixed6(x.as_f64())).collect();
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

/// `{:.6}` without a negative sign on values that round to zero.
pub fn fixed6(x: f64) -> String {
    let s = format!("{x:.6}");
    // avoid "-0.000000" so that rounding to zero stays canonical
    if s.trim_start_matches('-').chars().all(|c| c == '0' || c == '.') {
        s.trim_start_matches('-').to_string()
    } else {
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TransformKind {
    Extrinsic,
    Intrinsic,
    Total,
}

impl TransformKind {
    fn shape(self) -> (usize, usize) {
        match self {
            TransformKind::Extrinsic => (4, 4),
            TransformKind::Intrinsic | TransformKind::Total => (4, 3),
        }
    }
}

/// JSON transform document `{kind, rows, cols, entries}`, entries row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransformFile {
    pub kind: TransformKind,
    pub rows: usize,
    pub cols: usize,
    pub entries: Vec<f64>,
}

impl TransformFile {
    pub fn from_mat<T: Scalar>(kind: TransformKind, m: &Mat<T>) -> Result<Self> {
        let f = Self {
            kind,
            rows: m.rows(),
            cols: m.cols(),
            entries: m.as_slice().iter().map(|x| x.as_f64()).collect(),
        };
        f.validate()?;
        Ok(f)
    }

    pub fn validate(&self) -> Result<()> {
        let want = self.kind.shape();
        if (self.rows, self.cols) != want {
            return Err(Error::InvalidTransform(format!(
                "{:?} transform must be {}x{}, got {}x{}",
                self.kind, want.0, want.1, self.rows, self.cols
            )));
        }
        if self.entries.len() != self.rows * self.cols {
            return Err(Error::InvalidTransform(format!(
                "{} entries for a {}x{} matrix",
                self.entries.len(),
                self.rows,
                self.cols
            )));
        }
        Ok(())
    }

    pub fn to_mat<T: Scalar>(&self) -> Result<Mat<T>> {
        self.validate()?;
        Mat::new(self.rows, self.cols, self.entries.iter().map(|&x| T::lit(x)).collect())
    }

    pub fn parse(text: &str) -> Result<Self> {
        let f: Self = serde_json::from_str(text).map_err(|e| parse_err(e.line(), e.to_string()))?;
        f.validate()?;
        Ok(f)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("transform serializes");
        s.push('\n');
        s
    }

    fn expect_kind(&self, kind: TransformKind) -> Result<()> {
        if self.kind != kind {
            return Err(Error::InvalidTransform(format!(
                "expected {kind:?} transform, got {:?}",
                self.kind
            )));
        }
        Ok(())
    }

    pub fn to_extrinsic<T: Scalar>(&self) -> Result<ExtrinsicTransform<T>> {
        self.expect_kind(TransformKind::Extrinsic)?;
        ExtrinsicTransform::new(self.to_mat()?)
    }

    pub fn to_intrinsic<T: Scalar>(&self) -> Result<IntrinsicMatrix<T>> {
        self.expect_kind(TransformKind::Intrinsic)?;
        IntrinsicMatrix::new(self.to_mat()?)
    }
}

/// Reads a binary (P4) or ASCII (P2) PGM. For P2 any nonzero sample is
/// foreground; for P4 a set bit is.
pub fn read_pgm(bytes: &[u8]) -> Result<BinaryMask> {
    let mut pos = 0usize;
    let magic = next_token(bytes, &mut pos).ok_or_else(|| parse_err(1, "empty PGM"))?;
    let binary = match magic.as_str() {
        "P4" => true,
        "P2" => false,
        other => return Err(parse_err(1, format!("unsupported PGM magic `{other}`"))),
    };
    let mut header_num = |what: &str| -> Result<usize> {
        let tok =
            next_token(bytes, &mut pos).ok_or_else(|| parse_err(line_at(bytes, pos), format!("missing {what}")))?;
        tok.parse()
            .map_err(|_| parse_err(line_at(bytes, pos), format!("bad {what} `{tok}`")))
    };
    let width = header_num("width")?;
    let height = header_num("height")?;
    let mut bits = Vec::with_capacity(width * height);
    if binary {
        // exactly one whitespace byte separates the header from the raster
        pos += 1;
        let stride = width.div_ceil(8);
        let raster = bytes
            .get(pos..pos + stride * height)
            .ok_or_else(|| parse_err(line_at(bytes, pos), "truncated P4 raster"))?;
        for row in raster.chunks(stride) {
            for x in 0..width {
                bits.push(row[x / 8] & (0x80 >> (x % 8)) != 0);
            }
        }
    } else {
        let maxval = header_num("maxval")?;
        if maxval == 0 {
            return Err(parse_err(line_at(bytes, pos), "maxval must be positive"));
        }
        for _ in 0..width * height {
            let tok =
                next_token(bytes, &mut pos).ok_or_else(|| parse_err(line_at(bytes, pos), "truncated P2 raster"))?;
            let v: usize = tok
                .parse()
                .map_err(|_| parse_err(line_at(bytes, pos), format!("bad sample `{tok}`")))?;
            bits.push(v != 0);
        }
    }
    BinaryMask::new(width, height, bits)
}

fn next_token(bytes: &[u8], pos: &mut usize) -> Option<String> {
    loop {
        while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if *pos < bytes.len() && bytes[*pos] == b'#' {
            while *pos < bytes.len() && bytes[*pos] != b'\n' {
                *pos += 1;
            }
            continue;
        }
        break;
    }
    let start = *pos;
    while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    (start < *pos).then(|| String::from_utf8_lossy(&bytes[start..*pos]).into_owned())
}

fn line_at(bytes: &[u8], pos: usize) -> usize {
    1 + bytes[..pos.min(bytes.len())].iter().filter(|&&b| b == b'\n').count()
}

pub fn write_pgm_p4(mask: &BinaryMask) -> Vec<u8> {
    let mut out = format!("P4\n{} {}\n", mask.width(), mask.height()).into_bytes();
    let stride = mask.width().div_ceil(8);
    for y in 0..mask.height() {
        let mut row = vec![0u8; stride];
        for x in 0..mask.width() {
            if mask.get(x, y) {
                row[x / 8] |= 0x80 >> (x % 8);
            }
        }
        out.extend_from_slice(&row);
    }
    out
}

pub fn write_pgm_p2(mask: &BinaryMask) -> String {
    let mut out = format!("P2\n{} {}\n1\n", mask.width(), mask.height());
    for y in 0..mask.height() {
        let row: Vec<&str> = (0..mask.width())
            .map(|x| if mask.get(x, y) { "1" } else { "0" })
            .collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out
}

/// Evaluation table: one row per pair, then `CR` and `TRE` footer rows.
pub fn report_to_csv<T: Scalar>(pairs: &PointPairSet<T>, report: &ErrorReport<T>) -> String {
    let mut out = String::from("No,u,v,x,y,z,cal_x,cal_y,cal_z,error_mm\n");
    for (pair, pe) in pairs.iter().zip(&report.per_point) {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            pe.index + 1,
            fixed6(pair.image.u.as_f64()),
            fixed6(pair.image.v.as_f64()),
            fixed6(pe.measured.x.as_f64()),
            fixed6(pe.measured.y.as_f64()),
            fixed6(pe.measured.z.as_f64()),
            fixed6(pe.predicted.x.as_f64()),
            fixed6(pe.predicted.y.as_f64()),
            fixed6(pe.predicted.z.as_f64()),
            fixed6(pe.error_mm.as_f64()),
        );
    }
    let _ = writeln!(out, "CR,,,,,,,,,{}", fixed6(report.cr_mm.as_f64()));
    let _ = writeln!(out, "TRE,,,,,,,,,{}", fixed6(report.tre_mm.as_f64()));
    out
}

pub fn sweep_to_csv<T: Scalar>(rows: &[SweepRow<T>]) -> String {
    let mut out = String::from("sigma_mm,mean_cr_mm,mean_tre_mm,mean_intrinsic_rel_error\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{:.6e}",
            fixed6(r.sigma.as_f64()),
            fixed6(r.mean_cr.as_f64()),
            fixed6(r.mean_tre.as_f64()),
            r.mean_intrinsic_error.as_f64()
        );
    }
    out
}

/// Scatter of measured (circles) and mapped (crosses) points in the x-y
/// plane of the depth camera, with a residual line per pair.
pub fn residual_svg<T: Scalar>(report: &ErrorReport<T>) -> String {
    let (w, h, pad) = (640.0, 480.0, 40.0);
    let pts: Vec<(f64, f64)> = report
        .per_point
        .iter()
        .flat_map(|p| {
            [
                (p.measured.x.as_f64(), p.measured.y.as_f64()),
                (p.predicted.x.as_f64(), p.predicted.y.as_f64()),
            ]
        })
        .collect();
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in &pts {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    let span = (x1 - x0).max(y1 - y0).max(1e-9);
    let s = ((w - 2.0 * pad) / span).min((h - 2.0 * pad) / span);
    let map = |x: f64, y: f64| (pad + (x - x0) * s, pad + (y - y0) * s);

    let mut out = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n\
         <text x=\"{pad}\" y=\"24\" font-family=\"sans-serif\" font-size=\"14\">measured (o) vs calibrated (x), CR {:.4} mm, TRE {:.4} mm</text>\n",
        report.cr_mm.as_f64(),
        report.tre_mm.as_f64()
    );
    for p in &report.per_point {
        let (mx, my) = map(p.measured.x.as_f64(), p.measured.y.as_f64());
        let (px, py) = map(p.predicted.x.as_f64(), p.predicted.y.as_f64());
        let _ = writeln!(
            out,
            "<line class=\"residual\" x1=\"{mx:.2}\" y1=\"{my:.2}\" x2=\"{px:.2}\" y2=\"{py:.2}\" stroke=\"gray\"/>"
        );
        let _ = writeln!(
            out,
            "<circle class=\"measured\" cx=\"{mx:.2}\" cy=\"{my:.2}\" r=\"4\" fill=\"none\" stroke=\"blue\"/>"
        );
        let _ = writeln!(
            out,
            "<path class=\"predicted\" d=\"M{:.2} {:.2} L{:.2} {:.2} M{:.2} {:.2} L{:.2} {:.2}\" stroke=\"red\"/>",
            px - 4.0,
            py - 4.0,
            px + 4.0,
            py + 4.0,
            px - 4.0,
            py + 4.0,
            px + 4.0,
            py - 4.0
        );
    }
    out.push_str("</svg>\n");
    out
}
