//! The cell-tower network: identities, planar positions in meters, and
//! radius queries over a uniform grid index.
//!
//! All geometry in this crate is planar Euclidean. Inputs given as lon/lat
//! are converted once at load time with a local equirectangular projection
//! about the dataset centroid; country-scale distortion is acceptable for
//! the relative distance comparisons performed here.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

const EARTH_RADIUS_M: f64 = 6_371_000.0;

#[derive(Debug, Clone)]
pub struct Tower {
    pub id: String,
    pub x_m: f64,
    pub y_m: f64,
}

#[derive(Debug, Clone)]
pub struct TowerNetwork {
    towers: Vec<Tower>,
    by_id: HashMap<String, u32>,
    grid: GridIndex,
}

impl TowerNetwork {
    /// Build from `(id, x_m, y_m)` triples. Ids must be unique and
    /// coordinates finite.
    pub fn new(towers: Vec<(String, f64, f64)>) -> Result<Self> {
        let towers: Vec<Tower> = towers
            .into_iter()
            .map(|(id, x_m, y_m)| Tower { id, x_m, y_m })
            .collect();
        let mut by_id = HashMap::with_capacity(towers.len());
        for (i, t) in towers.iter().enumerate() {
            if !t.x_m.is_finite() || !t.y_m.is_finite() {
                return Err(Error::NonFiniteCoordinate(t.id.clone()));
            }
            if by_id.insert(t.id.clone(), i as u32).is_some() {
                return Err(Error::DuplicateTower(t.id.clone()));
            }
        }
        let grid = GridIndex::build(&towers);
        Ok(Self {
            towers,
            by_id,
            grid,
        })
    }

    /// Build from `(id, lon, lat)` triples via a local equirectangular
    /// projection about the centroid of the input.
    pub fn from_lon_lat(towers: Vec<(String, f64, f64)>) -> Result<Self> {
        if towers.is_empty() {
            return Self::new(Vec::new());
        }
        let n = towers.len() as f64;
        let lon0 = towers.iter().map(|t| t.1).sum::<f64>() / n;
        let lat0 = towers.iter().map(|t| t.2).sum::<f64>() / n;
        let cos_lat0 = lat0.to_radians().cos();
        let projected = towers
            .into_iter()
            .map(|(id, lon, lat)| {
                let x = EARTH_RADIUS_M * (lon - lon0).to_radians() * cos_lat0;
                let y = EARTH_RADIUS_M * (lat - lat0).to_radians();
                (id, x, y)
            })
            .collect();
        Self::new(projected)
    }

    pub fn len(&self) -> usize {
        self.towers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.towers.is_empty()
    }

    pub fn towers(&self) -> &[Tower] {
        &self.towers
    }

    pub fn tower(&self, idx: u32) -> &Tower {
        &self.towers[idx as usize]
    }

    pub fn id(&self, idx: u32) -> &str {
        &self.towers[idx as usize].id
    }

    pub fn index_of(&self, id: &str) -> Option<u32> {
        self.by_id.get(id).copied()
    }

    pub fn require(&self, id: &str) -> Result<u32> {
        self.index_of(id)
            .ok_or_else(|| Error::UnknownTower(id.to_string()))
    }

    /// Euclidean distance in meters between two towers.
    pub fn distance(&self, a: u32, b: u32) -> f64 {
        let ta = &self.towers[a as usize];
        let tb = &self.towers[b as usize];
        ((ta.x_m - tb.x_m).powi(2) + (ta.y_m - tb.y_m).powi(2)).sqrt()
    }

    pub fn distance_by_id(&self, a: &str, b: &str) -> Result<f64> {
        Ok(self.distance(self.require(a)?, self.require(b)?))
    }

    /// All towers within `radius_m` of `center` (the center itself included),
    /// in ascending index order.
    pub fn within_radius(&self, center: u32, radius_m: f64) -> Vec<u32> {
        let t = &self.towers[center as usize];
        let mut out = self.grid.query(&self.towers, t.x_m, t.y_m, radius_m);
        out.sort_unstable();
        out
    }

    /// Restrict the network to the given tower ids, preserving the given
    /// order. Coordinates are kept as-is.
    pub fn subset(&self, ids: &[String]) -> Result<Self> {
        let picked = ids
            .iter()
            .map(|id| {
                let idx = self.require(id)?;
                let t = &self.towers[idx as usize];
                Ok((t.id.clone(), t.x_m, t.y_m))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(picked)
    }

    /// Read a towers CSV. The header selects the coordinate convention:
    /// `tower_id,x_m,y_m` for planar meters or `tower_id,lon,lat` for
    /// geographic coordinates (projected at load). Any other header is an
    /// error.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().from_reader(reader);
        let header: Vec<String> = rdr
            .headers()?
            .iter()
            .map(|f| f.trim().to_string())
            .collect();
        let lonlat = match header.join(",").as_str() {
            "tower_id,x_m,y_m" => false,
            "tower_id,lon,lat" => true,
            got => {
                return Err(Error::BadHeader {
                    expected: "tower_id,x_m,y_m or tower_id,lon,lat".into(),
                    got: got.into(),
                })
            }
        };
        let mut rows = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let line = i as u64 + 2;
            if rec.len() != 3 {
                return Err(Error::MalformedLine {
                    line,
                    reason: format!("expected 3 fields, got {}", rec.len()),
                });
            }
            let parse = |s: &str, what: &str| -> Result<f64> {
                s.trim().parse::<f64>().map_err(|_| Error::MalformedLine {
                    line,
                    reason: format!("bad {what} `{s}`"),
                })
            };
            rows.push((rec[0].to_string(), parse(&rec[1], "x")?, parse(&rec[2], "y")?));
        }
        if lonlat {
            Self::from_lon_lat(rows)
        } else {
            Self::new(rows)
        }
    }

    pub fn read_csv_path<P: AsRef<Path>>(path: P) -> Result<Self> {
        Self::read_csv(std::fs::File::open(path)?)
    }

    /// Write the network as a planar-meters towers CSV.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["tower_id", "x_m", "y_m"])?;
        for t in &self.towers {
            w.write_record([t.id.as_str(), &format!("{:.3}", t.x_m), &format!("{:.3}", t.y_m)])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Uniform-grid spatial index for disk queries. Cell size adapts to the
/// point density so a query touches a handful of buckets.
#[derive(Debug, Clone)]
struct GridIndex {
    cell: f64,
    min_x: f64,
    min_y: f64,
    nx: u32,
    ny: u32,
    buckets: HashMap<(u32, u32), Vec<u32>>,
}

impl GridIndex {
    fn build(towers: &[Tower]) -> Self {
        if towers.is_empty() {
            return Self {
                cell: 1.0,
                min_x: 0.0,
                min_y: 0.0,
                nx: 1,
                ny: 1,
                buckets: HashMap::new(),
            };
        }
        let min_x = towers.iter().map(|t| t.x_m).fold(f64::INFINITY, f64::min);
        let max_x = towers.iter().map(|t| t.x_m).fold(f64::NEG_INFINITY, f64::max);
        let min_y = towers.iter().map(|t| t.y_m).fold(f64::INFINITY, f64::min);
        let max_y = towers.iter().map(|t| t.y_m).fold(f64::NEG_INFINITY, f64::max);
        let extent = (max_x - min_x).max(max_y - min_y).max(1.0);
        // aim for ~1 tower per cell on average
        let cells = (towers.len() as f64).sqrt().ceil().max(1.0);
        let cell = extent / cells;
        let nx = ((max_x - min_x) / cell).floor() as u32 + 1;
        let ny = ((max_y - min_y) / cell).floor() as u32 + 1;
        let mut buckets: HashMap<(u32, u32), Vec<u32>> = HashMap::new();
        for (i, t) in towers.iter().enumerate() {
            let cx = (((t.x_m - min_x) / cell).floor() as u32).min(nx - 1);
            let cy = (((t.y_m - min_y) / cell).floor() as u32).min(ny - 1);
            buckets.entry((cx, cy)).or_default().push(i as u32);
        }
        Self {
            cell,
            min_x,
            min_y,
            nx,
            ny,
            buckets,
        }
    }

    fn query(&self, towers: &[Tower], x: f64, y: f64, radius_m: f64) -> Vec<u32> {
        let r2 = radius_m * radius_m;
        let lo_cx = (((x - radius_m - self.min_x) / self.cell).floor().max(0.0)) as u32;
        let lo_cy = (((y - radius_m - self.min_y) / self.cell).floor().max(0.0)) as u32;
        let hi_cx = ((((x + radius_m - self.min_x) / self.cell).floor()).max(0.0) as u32).min(self.nx - 1);
        let hi_cy = ((((y + radius_m - self.min_y) / self.cell).floor()).max(0.0) as u32).min(self.ny - 1);
        let mut out = Vec::new();
        for cx in lo_cx..=hi_cx {
            for cy in lo_cy..=hi_cy {
                if let Some(ids) = self.buckets.get(&(cx, cy)) {
                    for &i in ids {
                        let t = &towers[i as usize];
                        let d2 = (t.x_m - x).powi(2) + (t.y_m - y).powi(2);
                        if d2 <= r2 {
                            out.push(i);
                        }
                    }
                }
            }
        }
        out
    }
}
