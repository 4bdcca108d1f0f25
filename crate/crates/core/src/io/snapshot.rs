//! Snapshot capture and serialization: CSV (one row per cell and layer,
//! lossless at 17 significant digits) and legacy ASCII VTK structured grids.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::mpsc;
use std::thread;

use crate::error::{Error, Result};
use crate::geometry::{water_concentration, Column, Grid, LayerGeometry, PhysicalParams, SimState, Vec2};
use crate::io::config::Format;
use crate::postproc::VerticalProfile;

const CSV_MAGIC: &str = "# mlswr-snapshot v1";

/// Primitive fields of one time level. Per-cell arrays are indexed by cell,
/// per-layer arrays by `cell·M + layer` (times `n_c` or `n_s` for c and s).
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub t: f64,
    pub step: u64,
    pub nx: usize,
    pub ny: usize,
    pub dx: f64,
    pub dy: f64,
    /// Layer fractions l_α, bottom first.
    pub fractions: Vec<f64>,
    pub n_c: usize,
    pub n_s: usize,
    pub h: Vec<f64>,
    pub zb: Vec<f64>,
    pub c: Vec<f64>,
    pub s: Vec<f64>,
    pub s_w: Vec<f64>,
    pub vel: Vec<Vec2>,
    /// Vertical velocity at layer midpoints, m/s.
    pub w: Vec<f64>,
}

impl Snapshot {
    /// Derives the primitive fields of `state`. Without `profiles` w is zero.
    pub fn capture(
        state: &SimState,
        step: u64,
        grid: &Grid,
        layers: &LayerGeometry,
        params: &PhysicalParams,
        profiles: Option<&[VerticalProfile]>,
    ) -> Result<Self> {
        let (n, m) = (grid.n_cells(), layers.count());
        let mut snap = Snapshot {
            t: state.t,
            step,
            nx: grid.nx,
            ny: grid.ny,
            dx: grid.dx,
            dy: grid.dy,
            fractions: layers.fractions().to_vec(),
            n_c: state.n_c,
            n_s: state.n_s,
            h: state.h.clone(),
            zb: grid.zb().to_vec(),
            c: Vec::with_capacity(n * m * state.n_c),
            s: Vec::with_capacity(n * m * state.n_s),
            s_w: Vec::with_capacity(n * m),
            vel: Vec::with_capacity(n * m),
            w: vec![0.0; n * m],
        };
        let mut col = Column::default();
        for i in 0..n {
            col.fill(state, grid, layers, params, i)?;
            for a in 0..m {
                snap.c.extend_from_slice(col.c_layer(a));
                snap.s.extend_from_slice(col.s_layer(a));
                snap.s_w.push(water_concentration(col.c_layer(a), col.s_layer(a), params)?);
                snap.vel.push(col.vel[a]);
            }
            if let Some(p) = profiles {
                for a in 0..m {
                    snap.w[i * m + a] = p[i].midpoint(a);
                }
            }
        }
        Ok(snap)
    }

    pub fn n_layers(&self) -> usize {
        self.fractions.len()
    }

    pub fn n_cells(&self) -> usize {
        self.nx * self.ny
    }

    fn cumulative(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.n_layers() + 1];
        for (a, l) in self.fractions.iter().enumerate() {
            out[a + 1] = out[a] + l;
        }
        out
    }

    fn center(&self, i: usize) -> Vec2 {
        [((i % self.nx) as f64 + 0.5) * self.dx, ((i / self.nx) as f64 + 0.5) * self.dy]
    }

    /// Checks that every field has the size implied by (nx, ny, M, n_c, n_s).
    pub fn check_shape(&self) -> std::result::Result<(), String> {
        let (n, m) = (self.n_cells(), self.n_layers());
        let sizes = [
            ("h", self.h.len(), n),
            ("zB", self.zb.len(), n),
            ("c", self.c.len(), n * m * self.n_c),
            ("s", self.s.len(), n * m * self.n_s),
            ("s_w", self.s_w.len(), n * m),
            ("velocity", self.vel.len(), n * m),
            ("w", self.w.len(), n * m),
        ];
        for (name, got, want) in sizes {
            if got != want {
                return Err(format!("field {name} has {got} values, expected {want}"));
            }
        }
        Ok(())
    }

    pub fn csv_header(&self) -> Vec<String> {
        let mut cols: Vec<String> = ["x1", "x2", "layer", "z_mid", "h", "zB"].map(String::from).to_vec();
        cols.extend((1..=self.n_c).map(|k| format!("c_{k}")));
        cols.extend((1..=self.n_s).map(|k| format!("s_{k}")));
        cols.extend(["s_w", "u", "v", "speed", "w"].map(String::from));
        cols
    }

    fn metadata(&self) -> String {
        let l: Vec<String> = self.fractions.iter().map(|l| format!("{l:.16e}")).collect();
        format!(
            "{CSV_MAGIC} t={:.16e} step={} nx={} ny={} dx={:.16e} dy={:.16e} n_c={} n_s={} l={}",
            self.t,
            self.step,
            self.nx,
            self.ny,
            self.dx,
            self.dy,
            self.n_c,
            self.n_s,
            l.join(";")
        )
    }

    /// CSV text: a metadata comment line, the header and one row per cell and
    /// layer (cell-major, layers bottom first, layer index from 0).
    pub fn to_csv(&self) -> Vec<u8> {
        let mut buf = self.metadata().into_bytes();
        buf.push(b'\n');
        let mut wtr = csv::Writer::from_writer(buf);
        let write_err = "writing to memory cannot fail";
        wtr.write_record(self.csv_header()).expect(write_err);
        let m = self.n_layers();
        let cum = self.cumulative();
        let f = |v: f64| format!("{v:.16e}");
        let mut row: Vec<String> = Vec::new();
        for i in 0..self.n_cells() {
            let [x1, x2] = self.center(i);
            for a in 0..m {
                let ia = i * m + a;
                let [u, v] = self.vel[ia];
                row.clear();
                row.extend([f(x1), f(x2), a.to_string()]);
                row.push(f(self.zb[i] + self.h[i] * (cum[a] + 0.5 * self.fractions[a])));
                row.extend([f(self.h[i]), f(self.zb[i])]);
                row.extend(self.c[ia * self.n_c..(ia + 1) * self.n_c].iter().map(|&x| f(x)));
                row.extend(self.s[ia * self.n_s..(ia + 1) * self.n_s].iter().map(|&x| f(x)));
                row.extend([f(self.s_w[ia]), f(u), f(v), f(u.hypot(v)), f(self.w[ia])]);
                wtr.write_record(&row).expect(write_err);
            }
        }
        wtr.into_inner().expect(write_err)
    }

    /// Parses the output of [`Snapshot::to_csv`].
    pub fn from_csv(text: &str) -> std::result::Result<Self, String> {
        let (meta, body) = text.split_once('\n').ok_or("missing metadata line")?;
        let rest = meta.strip_prefix(CSV_MAGIC).ok_or("missing snapshot header")?;
        let mut kv = std::collections::HashMap::new();
        for token in rest.split_whitespace() {
            let (k, v) = token.split_once('=').ok_or_else(|| format!("bad metadata token `{token}`"))?;
            kv.insert(k, v);
        }
        fn get<T: std::str::FromStr>(kv: &std::collections::HashMap<&str, &str>, key: &str) -> std::result::Result<T, String> {
            kv.get(key)
                .ok_or_else(|| format!("metadata lacks `{key}`"))?
                .parse()
                .map_err(|_| format!("metadata `{key}` is malformed"))
        }
        let fractions = get::<String>(&kv, "l")?
            .split(';')
            .map(|x| x.parse::<f64>().map_err(|_| format!("bad layer fraction `{x}`")))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        let (nx, ny): (usize, usize) = (get(&kv, "nx")?, get(&kv, "ny")?);
        let (n_c, n_s): (usize, usize) = (get(&kv, "n_c")?, get(&kv, "n_s")?);
        let m = fractions.len();
        let n = nx * ny;
        let mut snap = Snapshot {
            t: get(&kv, "t")?,
            step: get(&kv, "step")?,
            nx,
            ny,
            dx: get(&kv, "dx")?,
            dy: get(&kv, "dy")?,
            fractions,
            n_c,
            n_s,
            h: vec![0.0; n],
            zb: vec![0.0; n],
            c: Vec::with_capacity(n * m * n_c),
            s: Vec::with_capacity(n * m * n_s),
            s_w: Vec::with_capacity(n * m),
            vel: Vec::with_capacity(n * m),
            w: Vec::with_capacity(n * m),
        };
        let mut rdr = csv::Reader::from_reader(body.as_bytes());
        let header: Vec<String> = rdr.headers().map_err(|e| e.to_string())?.iter().map(String::from).collect();
        if header != snap.csv_header() {
            return Err("column header does not match the metadata".into());
        }
        let mut rows = 0;
        for (k, record) in rdr.records().enumerate() {
            let record = record.map_err(|e| e.to_string())?;
            let num = |j: usize| -> std::result::Result<f64, String> {
                record[j].parse().map_err(|_| format!("row {}: bad number `{}`", k + 1, &record[j]))
            };
            let (i, a) = (k / m.max(1), k % m.max(1));
            if i >= n || record[2] != a.to_string() {
                return Err(format!("row {} is out of order", k + 1));
            }
            if a == 0 {
                snap.h[i] = num(4)?;
                snap.zb[i] = num(5)?;
            }
            let mut j = 6;
            for _ in 0..n_c {
                snap.c.push(num(j)?);
                j += 1;
            }
            for _ in 0..n_s {
                snap.s.push(num(j)?);
                j += 1;
            }
            snap.s_w.push(num(j)?);
            snap.vel.push([num(j + 1)?, num(j + 2)?]);
            snap.w.push(num(j + 4)?);
            rows += 1;
        }
        if rows != n * m {
            return Err(format!("{rows} data rows, expected {}", n * m));
        }
        snap.check_shape()?;
        Ok(snap)
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv(&text).map_err(|message| Error::Snapshot { path: path.to_path_buf(), message })
    }

    /// Elevation of interface `k` at grid corner (px, py), averaged over the
    /// cells sharing the corner.
    fn corner_z(&self, px: usize, py: usize, rel: f64) -> f64 {
        let mut sum = 0.0;
        let mut count = 0.0;
        for iy in py.saturating_sub(1)..=py.min(self.ny - 1) {
            for ix in px.saturating_sub(1)..=px.min(self.nx - 1) {
                let i = iy * self.nx + ix;
                sum += self.zb[i] + self.h[i] * rel;
                count += 1.0;
            }
        }
        sum / count
    }

    /// Legacy ASCII VTK structured grid over the nx × ny × M lattice, with
    /// n_c + n_s + 5 cell fields.
    pub fn to_vtk(&self) -> Vec<u8> {
        let (nx, ny, m) = (self.nx, self.ny, self.n_layers());
        let n = nx * ny;
        let cum = self.cumulative();
        let mut out = String::new();
        let _ = writeln!(out, "# vtk DataFile Version 3.0");
        let _ = writeln!(out, "mlswr snapshot step={} t={:e}", self.step, self.t);
        let _ = writeln!(out, "ASCII\nDATASET STRUCTURED_GRID");
        let _ = writeln!(out, "DIMENSIONS {} {} {}", nx + 1, ny + 1, m + 1);
        let _ = writeln!(out, "POINTS {} double", (nx + 1) * (ny + 1) * (m + 1));
        for &rel in &cum {
            for py in 0..=ny {
                for px in 0..=nx {
                    let z = self.corner_z(px, py, rel);
                    let _ = writeln!(out, "{:e} {:e} {z:e}", px as f64 * self.dx, py as f64 * self.dy);
                }
            }
        }
        let _ = writeln!(out, "CELL_DATA {}", n * m);
        let mut scalar = |name: &str, value: &dyn Fn(usize, usize) -> f64| {
            let _ = writeln!(out, "SCALARS {name} double 1\nLOOKUP_TABLE default");
            for a in 0..m {
                for i in 0..n {
                    let _ = writeln!(out, "{:e}", value(i, a));
                }
            }
        };
        for k in 0..self.n_c {
            scalar(&format!("c_{}", k + 1), &|i, a| self.c[(i * m + a) * self.n_c + k]);
        }
        for k in 0..self.n_s {
            scalar(&format!("s_{}", k + 1), &|i, a| self.s[(i * m + a) * self.n_s + k]);
        }
        scalar("s_w", &|i, a| self.s_w[i * m + a]);
        scalar("speed", &|i, a| {
            let [u, v] = self.vel[i * m + a];
            u.hypot(v)
        });
        scalar("w", &|i, a| self.w[i * m + a]);
        scalar("h", &|i, _| self.h[i]);
        let _ = writeln!(out, "VECTORS velocity double");
        for a in 0..m {
            for i in 0..n {
                let [u, v] = self.vel[i * m + a];
                let _ = writeln!(out, "{u:e} {v:e} 0e0");
            }
        }
        out.into_bytes()
    }

    pub fn encode(&self, format: Format) -> Vec<u8> {
        match format {
            Format::Csv => self.to_csv(),
            Format::Vtk => self.to_vtk(),
        }
    }
}

/// Writes `snapshot` to `path` in the given format.
pub fn write_snapshot(snapshot: &Snapshot, format: Format, path: &Path) -> Result<()> {
    std::fs::write(path, snapshot.encode(format)).map_err(|e| Error::io(path, e))
}

pub fn extension(format: Format) -> &'static str {
    match format {
        Format::Csv => "csv",
        Format::Vtk => "vtk",
    }
}

/// `dir/snapshot_NNNNN.ext` for the `index`-th snapshot of a run.
pub fn snapshot_path(dir: &Path, index: usize, format: Format) -> PathBuf {
    dir.join(format!("snapshot_{index:05}.{}", extension(format)))
}

/// Background thread writing snapshots handed over by the solver loop.
pub struct SnapshotWriter {
    sender: Option<mpsc::SyncSender<(usize, Snapshot)>>,
    handle: Option<thread::JoinHandle<Result<Vec<PathBuf>>>>,
}

impl SnapshotWriter {
    pub fn spawn(dir: PathBuf, formats: Vec<Format>) -> Self {
        let (sender, receiver) = mpsc::sync_channel::<(usize, Snapshot)>(2);
        let handle = thread::spawn(move || {
            let mut written = Vec::new();
            for (index, snap) in receiver {
                for &format in &formats {
                    let path = snapshot_path(&dir, index, format);
                    write_snapshot(&snap, format, &path)?;
                    written.push(path);
                }
            }
            Ok(written)
        });
        Self { sender: Some(sender), handle: Some(handle) }
    }

    /// Queues a snapshot. A send failure means the writer already stopped on
    /// an error, which `finish` reports.
    pub fn submit(&mut self, index: usize, snapshot: Snapshot) -> Result<()> {
        let sender = self.sender.as_ref().expect("writer still open");
        if sender.send((index, snapshot)).is_err() {
            return Err(self.finish().err().unwrap_or_else(|| {
                Error::InvalidState("snapshot writer stopped unexpectedly".into())
            }));
        }
        Ok(())
    }

    /// Waits for pending writes and returns the paths written.
    pub fn finish(&mut self) -> Result<Vec<PathBuf>> {
        self.sender.take();
        match self.handle.take() {
            Some(h) => h
                .join()
                .unwrap_or_else(|_| Err(Error::InvalidState("snapshot writer panicked".into()))),
            None => Ok(Vec::new()),
        }
    }
}

impl Drop for SnapshotWriter {
    fn drop(&mut self) {
        let _ = self.finish();
    }
}
