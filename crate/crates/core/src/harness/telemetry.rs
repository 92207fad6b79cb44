//! Per-step records and CSV output.

use std::io::Write;
use std::path::Path;

use crate::error::Result;

#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub t: f64,
    pub r: f64,
    /// Main-line reference.
    pub c: f64,
    /// Dither.
    pub d: f64,
    pub y: f64,
    pub u: f64,
    pub x_p: [f64; 3],
    pub x_p_hat: [f64; 3],
    pub xi_hat: [f64; 3],
    pub delta: f64,
    pub delta_hat: f64,
    pub kappa_hat: Vec<f64>,
    pub kappa: Vec<f64>,
    /// Relative `‖η̂ − η‖`.
    pub eta_err: f64,
    /// Relative `‖T̂_I − T_I‖_F`.
    pub ti_err: f64,
    pub xdelta0_err: f64,
    /// Relative `‖κ̂ − κ‖`.
    pub kappa_err: f64,
    pub xp_err: f64,
    /// `‖x − x*‖` against the ideal closed loop.
    pub e_ref: f64,
    pub zeta: f64,
    /// Stage regressors before normalisation.
    pub delta_m: f64,
    pub m_theta: f64,
    pub m_kappa: f64,
    pub criterion: f64,
    pub reset: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Telemetry {
    pub kappa_dim: usize,
    pub records: Vec<Record>,
    pub resets: Vec<f64>,
    pub fe_level: Option<f64>,
}

impl Telemetry {
    pub fn new(kappa_dim: usize) -> Self {
        Telemetry { kappa_dim, ..Default::default() }
    }

    pub fn header(&self) -> Vec<String> {
        let mut h: Vec<String> = ["t", "r", "c", "d", "y", "u", "x1", "x2", "x3", "x1_hat", "x2_hat", "x3_hat"]
            .iter()
            .chain(&["xi1_hat", "xi2_hat", "xi3_hat", "delta", "delta_hat"])
            .map(|s| s.to_string())
            .collect();
        h.extend((0..self.kappa_dim).map(|i| format!("kappa_hat{}", i + 1)));
        h.extend((0..self.kappa_dim).map(|i| format!("kappa{}", i + 1)));
        h.extend(
            [
                "eta_err",
                "ti_err",
                "xdelta0_err",
                "kappa_err",
                "xp_err",
                "e_ref",
                "zeta",
                "delta_m",
                "m_theta",
                "m_kappa",
                "criterion",
                "reset",
            ]
            .iter()
            .map(|s| s.to_string()),
        );
        h
    }

    /// Writes the records as CSV to any writer.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(self.header())?;
        for rec in &self.records {
            let mut row: Vec<f64> = vec![rec.t, rec.r, rec.c, rec.d, rec.y, rec.u];
            row.extend(rec.x_p);
            row.extend(rec.x_p_hat);
            row.extend(rec.xi_hat);
            row.extend([rec.delta, rec.delta_hat]);
            row.extend(&rec.kappa_hat);
            row.extend(&rec.kappa);
            row.extend([
                rec.eta_err,
                rec.ti_err,
                rec.xdelta0_err,
                rec.kappa_err,
                rec.xp_err,
                rec.e_ref,
                rec.zeta,
                rec.delta_m,
                rec.m_theta,
                rec.m_kappa,
                rec.criterion,
            ]);
            // `Display` for f64 is the shortest string that parses back exactly.
            let mut fields: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            fields.push(u8::from(rec.reset).to_string());
            out.write_record(&fields)?;
        }
        out.flush()?;
        Ok(())
    }
}

pub fn emit_csv(tel: &Telemetry, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path)?;
    tel.write_csv(std::io::BufWriter::new(file))
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn sample(t: f64) -> Record {
        Record {
            t,
            r: 1.0,
            c: 1.0,
            d: 0.0,
            y: 0.1 + t,
            u: -3.25,
            x_p: [0.1, 0.2, 1.0 / 3.0],
            x_p_hat: [0.0; 3],
            xi_hat: [1e-300, -0.0, 5e300],
            delta: 0.5,
            delta_hat: 0.49,
            kappa_hat: vec![60.0, -1.5, 0.0, 0.0],
            kappa: vec![41.85, -14.21, 9.52, 0.8025],
            eta_err: 1.0,
            ti_err: 1.0,
            xdelta0_err: 0.5,
            kappa_err: 0.4,
            xp_err: 0.3,
            e_ref: 0.0,
            zeta: 0.5,
            delta_m: 0.0,
            m_theta: 0.0,
            m_kappa: 0.0,
            criterion: 0.001,
            reset: true,
        }
    }

    fn to_string(tel: &Telemetry) -> String {
        let mut buf = Vec::new();
        tel.write_csv(&mut buf).unwrap();
        String::from_utf8(buf).unwrap()
    }

    #[test]
    fn empty_is_header_only() {
        let s = to_string(&Telemetry::new(4));
        assert_eq!(s.lines().count(), 1);
        assert!(s.starts_with("t,r,c,d,y,u,x1,"));
        assert!(s.contains("kappa_hat4,kappa1"));
    }

    #[test]
    fn one_record_two_lines() {
        let mut tel = Telemetry::new(4);
        tel.records.push(sample(0.0));
        assert_eq!(to_string(&tel).lines().count(), 2);
    }

    #[test]
    fn values_round_trip_exactly() {
        let mut tel = Telemetry::new(4);
        tel.records.push(sample(0.1));
        tel.records.push(sample(0.7));
        let s = to_string(&tel);
        let mut rd = csv::Reader::from_reader(s.as_bytes());
        let header = rd.headers().unwrap().clone();
        assert_eq!(header.len(), tel.header().len());
        let rows: Vec<_> = rd.records().map(|r| r.unwrap()).collect();
        let col = |name: &str| header.iter().position(|h| h == name).unwrap();
        for (row, rec) in rows.iter().zip(&tel.records) {
            assert_eq!(row[col("y")].parse::<f64>().unwrap().to_bits(), rec.y.to_bits());
            assert_eq!(row[col("x3")].parse::<f64>().unwrap().to_bits(), rec.x_p[2].to_bits());
            assert_eq!(row[col("xi1_hat")].parse::<f64>().unwrap(), 1e-300);
            assert_eq!(row[col("xi2_hat")].parse::<f64>().unwrap().to_bits(), (-0.0f64).to_bits());
            assert_eq!(&row[col("reset")], "1");
        }
    }

    #[test]
    fn io_errors_surface() {
        let dir = tempfile::tempdir().unwrap();
        let missing = dir.path().join("no/such/dir/out.csv");
        assert!(emit_csv(&Telemetry::new(4), &missing).is_err());
    }
}
