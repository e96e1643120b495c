//! Binary snapshots of simulator states and a physical-space CSV dump.
//!
//! Layout (little endian): the 8-byte magic `FENECKPT`, a `u32` version, a
//! `u8` kind (0 coupled, 1 incompressible), `u32` dim, grid size, radial and
//! angular orders, `f64` exponent `k`, `f64` time, `u32` component count and
//! then every component as `(re, im)` pairs in grid order.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::field::SpectralField;
use crate::model::Model;
use crate::state::{CoupledState, IncompressibleState, PolymerField};

const MAGIC: &[u8; 8] = b"FENECKPT";
const VERSION: u32 = 1;

/// Either kind of state.
#[derive(Debug, Clone, PartialEq)]
pub enum Snapshot {
    Coupled(CoupledState),
    Incompressible(IncompressibleState),
}

impl Snapshot {
    fn kind(&self) -> u8 {
        match self {
            Snapshot::Coupled(_) => 0,
            Snapshot::Incompressible(_) => 1,
        }
    }

    fn time(&self) -> f64 {
        match self {
            Snapshot::Coupled(s) => s.t,
            Snapshot::Incompressible(s) => s.t,
        }
    }

    fn components(&self) -> Vec<&Vec<Complex64>> {
        match self {
            Snapshot::Coupled(s) => s.eta.comps.iter().chain(&s.u.comps).chain(&s.psi.field.comps).collect(),
            Snapshot::Incompressible(s) => s.v.comps.iter().chain(&s.phi.field.comps).collect(),
        }
    }
}

pub fn save(model: &Model, snap: &Snapshot, path: &Path) -> Result<()> {
    let p = &model.params;
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_u32::<LittleEndian>(VERSION)?;
    w.write_u8(snap.kind())?;
    for v in [p.dim, p.grid_n, p.rad_order, p.ang_order] {
        w.write_u32::<LittleEndian>(v as u32)?;
    }
    w.write_f64::<LittleEndian>(p.k)?;
    w.write_f64::<LittleEndian>(snap.time())?;
    let comps = snap.components();
    w.write_u32::<LittleEndian>(comps.len() as u32)?;
    for c in comps {
        for z in c {
            w.write_f64::<LittleEndian>(z.re)?;
            w.write_f64::<LittleEndian>(z.im)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads a snapshot written by [`save`]; the header must match `model`.
pub fn load(model: &Model, path: &Path) -> Result<Snapshot> {
    let p = &model.params;
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Checkpoint("bad magic".into()));
    }
    let version = r.read_u32::<LittleEndian>()?;
    if version != VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let kind = r.read_u8()?;
    let mut hdr = [0usize; 4];
    for h in hdr.iter_mut() {
        *h = r.read_u32::<LittleEndian>()? as usize;
    }
    let k = r.read_f64::<LittleEndian>()?;
    if hdr != [p.dim, p.grid_n, p.rad_order, p.ang_order] || k != p.k {
        return Err(Error::BasisMismatch(format!(
            "checkpoint (dim, n, rad, ang, k) = {hdr:?}, {k}; model {:?}, {}",
            [p.dim, p.grid_n, p.rad_order, p.ang_order],
            p.k
        )));
    }
    let t = r.read_f64::<LittleEndian>()?;
    let ncomp = r.read_u32::<LittleEndian>()? as usize;
    let d = p.dim;
    let nb = model.n_basis();
    let expected = match kind {
        0 => 1 + d + nb,
        1 => d + nb,
        _ => return Err(Error::Checkpoint(format!("unknown kind {kind}"))),
    };
    if ncomp != expected {
        return Err(Error::Checkpoint(format!("{ncomp} components, expected {expected}")));
    }
    let len = model.torus.len();
    let mut comps = Vec::with_capacity(ncomp);
    for _ in 0..ncomp {
        let mut c = Vec::with_capacity(len);
        for _ in 0..len {
            let re = r.read_f64::<LittleEndian>()?;
            let im = r.read_f64::<LittleEndian>()?;
            c.push(Complex64::new(re, im));
        }
        comps.push(c);
    }
    let mut rest = Vec::new();
    r.read_to_end(&mut rest)?;
    if !rest.is_empty() {
        return Err(Error::Checkpoint(format!("{} trailing bytes", rest.len())));
    }
    let grid = model.torus.grid();
    let field = |cs: Vec<Vec<Complex64>>| SpectralField { grid, comps: cs };
    let poly = |cs: Vec<Vec<Complex64>>| PolymerField { basis: model.basis.id(), field: field(cs) };
    let mut it = comps.into_iter();
    Ok(match kind {
        0 => {
            let eta = field(it.by_ref().take(1).collect());
            let u = field(it.by_ref().take(d).collect());
            Snapshot::Coupled(CoupledState { t, eta, u, psi: poly(it.collect()) })
        }
        _ => {
            let v = field(it.by_ref().take(d).collect());
            Snapshot::Incompressible(IncompressibleState { t, v, phi: poly(it.collect()) })
        }
    })
}

/// Grid values of every component, one row per grid point.
pub fn write_physical_csv(model: &Model, snap: &Snapshot, path: &Path) -> Result<()> {
    let t = &model.torus;
    let d = t.dim();
    let nb = model.n_basis();
    let axes = ["x", "y", "z"];
    let mut header: Vec<String> = axes[..d].iter().map(|s| s.to_string()).collect();
    match snap {
        Snapshot::Coupled(_) => {
            header.push("eta".into());
            header.extend((1..=d).map(|a| format!("u_{a}")));
        }
        Snapshot::Incompressible(_) => header.extend((1..=d).map(|a| format!("v_{a}"))),
    }
    header.extend((0..nb).map(|n| format!("c_{n}")));
    let phys: Vec<Vec<f64>> = snap.components().into_iter().map(|c| t.inverse(c)).collect();
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{}", header.join(","))?;
    for q in 0..t.len() {
        let x = t.grid().point(q);
        let row: Vec<String> = x[..d].iter().chain(phys.iter().map(|c| &c[q])).map(|v| format!("{v:e}")).collect();
        writeln!(w, "{}", row.join(","))?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::Parameters;
    use crate::state::make_initial_data;

    fn model() -> Model {
        Model::new(&Parameters { grid_n: 8, rad_order: 2, ang_order: 1, ..Parameters::default() }).unwrap()
    }

    #[test]
    fn round_trip_is_bitwise() {
        let m = model();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.bin");
        let mut s = make_initial_data(&m, 0.1);
        s.t = 1.25;
        let snap = Snapshot::Coupled(s);
        save(&m, &snap, &path).unwrap();
        assert_eq!(load(&m, &path).unwrap(), snap);

        let c = make_initial_data(&m, 0.2);
        let inc = Snapshot::Incompressible(IncompressibleState { t: 0.5, v: m.torus.project(&c.u), phi: c.psi });
        save(&m, &inc, &path).unwrap();
        assert_eq!(load(&m, &path).unwrap(), inc);
    }

    #[test]
    fn rejects_foreign_discretization_and_garbage() {
        let m = model();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.bin");
        save(&m, &Snapshot::Coupled(CoupledState::zeros(&m)), &path).unwrap();
        let other =
            Model::new(&Parameters { grid_n: 16, rad_order: 2, ang_order: 1, ..Parameters::default() }).unwrap();
        assert!(matches!(load(&other, &path), Err(Error::BasisMismatch(_))));
        std::fs::write(&path, b"NOTACKPTxxxx").unwrap();
        assert!(matches!(load(&m, &path), Err(Error::Checkpoint(_))));
    }

    #[test]
    fn csv_has_a_row_per_point() {
        let m = model();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.csv");
        write_physical_csv(&m, &Snapshot::Coupled(make_initial_data(&m, 0.1)), &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 1 + 64);
        assert!(lines[0].starts_with("x,y,eta,u_1,u_2,c_0"));
        assert_eq!(lines[1].split(',').count(), 2 + 3 + m.n_basis());
    }
}
