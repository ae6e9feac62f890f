//! Bit-exact trajectory CSV format.
//!
//! Header: `t,p0..p{d-1}[,v0..v{d-1}],u0..u{d-1},delta_norm,f,V,min_dist[,beta][,vhat0..]`
//! Values use shortest round-trip decimal rendering (Rust's default float
//! formatting), LF line endings, and no locale dependence, so repeated runs
//! of the same seeded scenario produce byte-identical files.

use std::io::{BufRead, Write};

use crate::analysis::GroundTruth;
use crate::error::{Error, Result};
use crate::scenario::{AgentModel, Scenario};
use crate::vecgeom::Vector;
use crate::world::{Sample, Trajectory};

/// Which optional column groups a scenario's law produces.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Columns {
    pub dim: usize,
    pub has_v: bool,
    pub has_beta: bool,
    pub has_vhat: bool,
}

impl Columns {
    pub fn for_scenario(scenario: &Scenario) -> Self {
        use crate::laws::ControlLaw::*;
        Columns {
            dim: scenario.dimension,
            has_v: scenario.agent.model == AgentModel::Double,
            has_beta: matches!(scenario.law, AdaptiveSmcSi { .. }),
            has_vhat: matches!(scenario.law, AdaptiveConstVelSi { .. } | AdaptiveConstVelDi { .. }),
        }
    }

    pub fn header(&self) -> String {
        let mut cols = vec!["t".to_string()];
        for k in 0..self.dim {
            cols.push(format!("p{k}"));
        }
        if self.has_v {
            for k in 0..self.dim {
                cols.push(format!("v{k}"));
            }
        }
        for k in 0..self.dim {
            cols.push(format!("u{k}"));
        }
        cols.push("delta_norm".into());
        cols.push("f".into());
        cols.push("V".into());
        cols.push("min_dist".into());
        if self.has_beta {
            cols.push("beta".into());
        }
        if self.has_vhat {
            for k in 0..self.dim {
                cols.push(format!("vhat{k}"));
            }
        }
        cols.join(",")
    }
}

pub fn write_csv(w: &mut impl Write, traj: &Trajectory, scenario: &Scenario) -> std::io::Result<()> {
    let cols = Columns::for_scenario(scenario);
    writeln!(w, "{}", cols.header())?;
    let mut line = String::with_capacity(256);
    for s in &traj.samples {
        line.clear();
        push(&mut line, s.t);
        for k in 0..cols.dim {
            push(&mut line, s.p[k]);
        }
        if cols.has_v {
            let v = s.v.expect("double-integrator sample has velocity");
            for k in 0..cols.dim {
                push(&mut line, v[k]);
            }
        }
        for k in 0..cols.dim {
            push(&mut line, s.u[k]);
        }
        push(&mut line, s.delta.norm());
        push(&mut line, s.f);
        push(&mut line, s.lyap);
        push(&mut line, s.min_dist);
        if cols.has_beta {
            push(&mut line, s.beta.expect("adaptive sliding sample has beta"));
        }
        if cols.has_vhat {
            let vh = s.v_hat.expect("adaptive sample has vhat");
            for k in 0..cols.dim {
                push(&mut line, vh[k]);
            }
        }
        // strip the leading separator
        writeln!(w, "{}", &line[1..])?;
    }
    Ok(())
}

fn push(line: &mut String, v: f64) {
    use std::fmt::Write as _;
    write!(line, ",{v}").expect("writing to a String cannot fail");
}

/// Reads a trajectory back from its CSV. The auxiliary sliding state `q` is
/// not part of the format, so it comes back as `None`; the tracking error is
/// recomputed from the scenario's ground-truth optimum.
pub fn read_csv(r: impl BufRead, scenario: &Scenario) -> Result<Trajectory> {
    let cols = Columns::for_scenario(scenario);
    let expected = cols.header();
    let mut lines = r.lines();
    let header = match lines.next() {
        Some(Ok(h)) => h,
        _ => return Err(Error::Parse("empty trajectory file".into())),
    };
    if header.trim_end() != expected {
        return Err(Error::Schema(format!(
            "trajectory header does not match the scenario: expected `{expected}`, got \
             `{header}`"
        )));
    }
    let gt = GroundTruth::new(scenario)?;
    let field = &scenario.beacons;
    let dim = cols.dim;
    let ncols = expected.split(',').count();

    let mut samples = Vec::new();
    for (lineno, line) in lines.enumerate() {
        let line = line.map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 2)))?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<f64> = line
            .split(',')
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 2)))
            })
            .collect::<Result<_>>()?;
        if fields.len() != ncols {
            return Err(Error::Parse(format!(
                "line {}: expected {ncols} columns, got {}",
                lineno + 2,
                fields.len()
            )));
        }
        let mut it = fields.into_iter();
        let mut take = |n: usize| -> Vec<f64> { (&mut it).take(n).collect() };
        let t = take(1)[0];
        let p = Vector::new(&take(dim));
        let v = cols.has_v.then(|| Vector::new(&take(dim)));
        let u = Vector::new(&take(dim));
        let _delta_norm = take(1)[0];
        let f = take(1)[0];
        let lyap = take(1)[0];
        let min_dist = take(1)[0];
        let beta = cols.has_beta.then(|| take(1)[0]);
        let v_hat = cols.has_vhat.then(|| Vector::new(&take(dim)));
        let p_star = gt.optimum_at(field, t);
        samples.push(Sample {
            t,
            p,
            v,
            u,
            v_hat,
            beta,
            q: None,
            delta: p - p_star,
            f,
            lyap,
            min_dist,
        });
    }
    if samples.is_empty() {
        return Err(Error::Parse("trajectory file has no samples".into()));
    }
    Ok(Trajectory {
        dim,
        dt: scenario.dt,
        record_stride: scenario.record_stride,
        samples,
        collision: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::preset;

    #[test]
    fn header_shapes() {
        let sc = preset("sim1a-gradient").unwrap();
        assert_eq!(
            Columns::for_scenario(&sc).header(),
            "t,p0,p1,u0,u1,delta_norm,f,V,min_dist"
        );

        let sc = preset("sim1b").unwrap();
        assert_eq!(
            Columns::for_scenario(&sc).header(),
            "t,p0,p1,u0,u1,delta_norm,f,V,min_dist,vhat0,vhat1"
        );

        let sc = preset("sim1c-adaptive").unwrap();
        assert_eq!(
            Columns::for_scenario(&sc).header(),
            "t,p0,p1,u0,u1,delta_norm,f,V,min_dist,beta"
        );

        let sc = preset("sim2b").unwrap();
        assert_eq!(
            Columns::for_scenario(&sc).header(),
            "t,p0,p1,p2,v0,v1,v2,u0,u1,u2,delta_norm,f,V,min_dist,vhat0,vhat1,vhat2"
        );

        let sc = preset("sim2c").unwrap();
        assert_eq!(
            Columns::for_scenario(&sc).header(),
            "t,p0,p1,p2,v0,v1,v2,u0,u1,u2,delta_norm,f,V,min_dist"
        );
    }

    #[test]
    fn write_read_round_trip() {
        let mut sc = preset("sim1b").unwrap();
        sc.horizon = 0.5;
        let out = crate::scenario::run_scenario(&sc).unwrap();
        let mut buf = Vec::new();
        write_csv(&mut buf, &out.trajectory, &sc).unwrap();
        let back = read_csv(buf.as_slice(), &sc).unwrap();
        assert_eq!(back.samples.len(), out.trajectory.samples.len());
        for (a, b) in back.samples.iter().zip(&out.trajectory.samples) {
            assert_eq!(a.t, b.t);
            assert_eq!(a.p, b.p);
            assert_eq!(a.u, b.u);
            assert_eq!(a.lyap, b.lyap);
            assert_eq!(a.v_hat, b.v_hat);
            assert!((a.delta - b.delta).norm() < 1e-12);
        }
    }

    #[test]
    fn lf_line_endings_and_stable_bytes() {
        let mut sc = preset("sim1a-gradient").unwrap();
        sc.horizon = 0.2;
        let out = crate::scenario::run_scenario(&sc).unwrap();
        let mut a = Vec::new();
        write_csv(&mut a, &out.trajectory, &sc).unwrap();
        assert!(!a.contains(&b'\r'));
        let out2 = crate::scenario::run_scenario(&sc).unwrap();
        let mut b = Vec::new();
        write_csv(&mut b, &out2.trajectory, &sc).unwrap();
        assert_eq!(a, b);
    }
}
