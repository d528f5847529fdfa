//! Text formats for panels, grids and catalogs, and catalog binning.
//!
//! Panel files are long-format CSV preceded by a `#` header block:
//!
//! ```text
//! # quakescore-panel v1
//! # kind=forecast
//! # model_id=FCM
//! # cells=2
//! # days=3
//! # origin=2024-01-01
//! # window_length=7
//! # grid_checksum=<sha256 of the cell ids>
//! cell_id,day_index,value
//! c0,0,1.0000000000000000e-3
//! ```
//!
//! Missing observation rows are zero counts; missing forecast rows are an
//! error. Floats are written with 17 significant digits.

use std::collections::{HashMap, HashSet};
use std::fs;
use std::io::Write;
use std::path::Path;

use chrono::{DateTime, NaiveDate, NaiveDateTime};

use crate::error::{Error, Result};
use crate::model::{Catalog, CellBox, Event, ForecastPanel, GridSpec, ObservationPanel, TimeIndex};

const MAGIC: &str = "quakescore-panel v1";

/// Round-trip float formatting; infinities are written as `inf`.
pub fn format_float(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v == f64::INFINITY {
        "inf".into()
    } else if v == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{v:.16e}")
    }
}

/// Undefined values are written as an empty field.
pub fn format_optional(v: Option<f64>) -> String {
    v.map(format_float).unwrap_or_default()
}

pub fn parse_float(s: &str) -> std::result::Result<f64, String> {
    match s.trim() {
        "inf" | "+inf" | "Inf" | "infinity" => Ok(f64::INFINITY),
        "-inf" | "-Inf" | "-infinity" => Ok(f64::NEG_INFINITY),
        t => t.parse::<f64>().map_err(|e| format!("'{t}' is not a number: {e}")),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PanelKind {
    Forecast,
    Observation,
}

impl PanelKind {
    fn as_str(self) -> &'static str {
        match self {
            Self::Forecast => "forecast",
            Self::Observation => "observation",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PanelHeader {
    pub kind: PanelKind,
    pub model_id: String,
    pub cells: usize,
    pub days: usize,
    pub origin: NaiveDate,
    pub window_length: u32,
    pub grid_checksum: String,
}

impl PanelHeader {
    pub fn time_index(&self) -> Result<TimeIndex> {
        TimeIndex::new(self.origin, self.days, self.window_length)
    }
}

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: msg.into(),
    }
}

struct RawPanel {
    header: PanelHeader,
    // (line, cell_id, day, value text)
    rows: Vec<(usize, String, usize, String)>,
}

fn read_raw_panel(path: &Path) -> Result<RawPanel> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let mut fields: HashMap<String, (usize, String)> = HashMap::new();
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l)).peekable();
    let mut magic = false;
    while let Some(&(no, line)) = lines.peek() {
        let Some(rest) = line.strip_prefix('#') else { break };
        lines.next();
        let rest = rest.trim();
        if rest == MAGIC {
            magic = true;
        } else if let Some((k, v)) = rest.split_once('=') {
            fields.insert(k.trim().to_string(), (no, v.trim().to_string()));
        }
    }
    if !magic {
        return Err(parse_err(path, 1, format!("missing '# {MAGIC}' header line")));
    }
    let get = |k: &str| -> Result<&(usize, String)> {
        fields
            .get(k)
            .ok_or_else(|| parse_err(path, 1, format!("header field '{k}' is missing")))
    };
    let num = |k: &str| -> Result<usize> {
        let (no, v) = get(k)?;
        v.parse()
            .map_err(|_| parse_err(path, *no, format!("header field '{k}' is not a count: '{v}'")))
    };
    let kind = match get("kind")?.1.as_str() {
        "forecast" => PanelKind::Forecast,
        "observation" | "observations" => PanelKind::Observation,
        other => return Err(parse_err(path, get("kind")?.0, format!("unknown panel kind '{other}'"))),
    };
    let (no, origin) = get("origin")?;
    let origin = NaiveDate::parse_from_str(origin, "%Y-%m-%d")
        .map_err(|e| parse_err(path, *no, format!("bad origin date '{origin}': {e}")))?;
    let header = PanelHeader {
        kind,
        model_id: fields.get("model_id").map(|f| f.1.clone()).unwrap_or_default(),
        cells: num("cells")?,
        days: num("days")?,
        origin,
        window_length: num("window_length")? as u32,
        grid_checksum: get("grid_checksum")?.1.clone(),
    };

    let (no, col_line) = lines
        .next()
        .ok_or_else(|| parse_err(path, 1, "missing column header"))?;
    let cols: Vec<&str> = col_line.split(',').map(str::trim).collect();
    if cols != ["cell_id", "day_index", "value"] {
        return Err(parse_err(
            path,
            no,
            format!("expected columns cell_id,day_index,value, found '{col_line}'"),
        ));
    }
    let mut rows = Vec::new();
    for (no, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 3 {
            return Err(parse_err(path, no, format!("expected 3 fields, found {}", parts.len())));
        }
        let day = parts[1]
            .trim()
            .parse::<usize>()
            .map_err(|_| parse_err(path, no, format!("bad day index '{}'", parts[1].trim())))?;
        rows.push((no, parts[0].trim().to_string(), day, parts[2].trim().to_string()));
    }
    Ok(RawPanel { header, rows })
}

/// Reads just the header block of a panel file.
pub fn read_panel_header(path: &Path) -> Result<PanelHeader> {
    Ok(read_raw_panel(path)?.header)
}

/// Cell ids of a panel file in order of first appearance, checked against the
/// header checksum. Lets a dense panel file stand in for a grid file.
pub fn grid_from_panel(path: &Path) -> Result<GridSpec> {
    let raw = read_raw_panel(path)?;
    let mut seen = HashSet::new();
    let mut ids = Vec::new();
    for (_, id, _, _) in &raw.rows {
        if seen.insert(id.as_str()) {
            ids.push(id.clone());
        }
    }
    let grid = GridSpec::new(ids)?;
    if grid.checksum() != raw.header.grid_checksum || grid.len() != raw.header.cells {
        return Err(parse_err(
            path,
            1,
            "cell order cannot be recovered from the rows (checksum mismatch); pass a grid file",
        ));
    }
    Ok(grid)
}

fn fill_values(path: &Path, raw: &RawPanel, grid: &GridSpec, kind: PanelKind) -> Result<Vec<Option<(usize, String)>>> {
    let h = &raw.header;
    if h.kind != kind {
        return Err(parse_err(
            path,
            1,
            format!("expected a {} panel, found {}", kind.as_str(), h.kind.as_str()),
        ));
    }
    if h.cells != grid.len() {
        return Err(Error::dims(format!(
            "{}: header declares {} cells but the grid has {}",
            path.display(),
            h.cells,
            grid.len()
        )));
    }
    if h.grid_checksum != grid.checksum() {
        return Err(parse_err(path, 1, "grid checksum does not match the grid in use"));
    }
    let mut slots: Vec<Option<(usize, String)>> = vec![None; h.cells * h.days];
    for (no, id, day, value) in &raw.rows {
        let c = grid
            .index_of(id)
            .ok_or_else(|| parse_err(path, *no, format!("unknown cell id '{id}'")))?;
        if *day >= h.days {
            return Err(parse_err(path, *no, format!("day index {day} outside 0..{}", h.days)));
        }
        let slot = &mut slots[day * h.cells + c];
        if let Some((first, _)) = slot {
            return Err(parse_err(
                path,
                *no,
                format!("duplicate row for cell '{id}', day {day} (first at line {first})"),
            ));
        }
        *slot = Some((*no, value.clone()));
    }
    Ok(slots)
}

pub fn load_forecast(path: &Path, grid: &GridSpec) -> Result<(ForecastPanel, PanelHeader)> {
    let raw = read_raw_panel(path)?;
    let slots = fill_values(path, &raw, grid, PanelKind::Forecast)?;
    let h = &raw.header;
    let mut values = Vec::with_capacity(slots.len());
    for (i, slot) in slots.iter().enumerate() {
        let (no, text) = slot.as_ref().ok_or_else(|| {
            parse_err(
                path,
                0,
                format!(
                    "missing forecast for cell '{}', day {}",
                    grid.cell_ids()[i % h.cells],
                    i / h.cells
                ),
            )
        })?;
        let v = parse_float(text).map_err(|m| parse_err(path, *no, m))?;
        if !(v.is_finite() && v >= 0.0) {
            return Err(parse_err(
                path,
                *no,
                format!("forecast value {v} must be finite and nonnegative"),
            ));
        }
        values.push(v);
    }
    let id = if h.model_id.is_empty() {
        path.file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default()
    } else {
        h.model_id.clone()
    };
    Ok((ForecastPanel::new(id, h.cells, h.days, values)?, raw.header))
}

pub fn load_observations(path: &Path, grid: &GridSpec) -> Result<(ObservationPanel, PanelHeader)> {
    let raw = read_raw_panel(path)?;
    let slots = fill_values(path, &raw, grid, PanelKind::Observation)?;
    let h = &raw.header;
    let mut counts = Vec::with_capacity(slots.len());
    for slot in &slots {
        counts.push(match slot {
            None => 0,
            Some((no, text)) => text.parse::<u32>().map_err(|_| {
                parse_err(
                    path,
                    *no,
                    format!("observation '{text}' is not a nonnegative integer count"),
                )
            })?,
        });
    }
    Ok((ObservationPanel::new(h.cells, h.days, counts)?, raw.header))
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    let mut f = fs::File::create(path).map_err(|e| io_err(path, e))?;
    f.write_all(contents.as_bytes()).map_err(|e| io_err(path, e))
}

fn header_text(kind: PanelKind, model_id: &str, grid: &GridSpec, time: &TimeIndex) -> String {
    format!(
        "# {MAGIC}\n# kind={}\n# model_id={model_id}\n# cells={}\n# days={}\n# origin={}\n# window_length={}\n# grid_checksum={}\ncell_id,day_index,value\n",
        kind.as_str(),
        grid.len(),
        time.days(),
        time.origin().format("%Y-%m-%d"),
        time.window_length(),
        grid.checksum()
    )
}

fn check_shape(grid: &GridSpec, time: &TimeIndex, dims: (usize, usize)) -> Result<()> {
    if dims != (grid.len(), time.days()) {
        return Err(Error::dims(format!(
            "panel is {:?} but grid and time index describe ({}, {})",
            dims,
            grid.len(),
            time.days()
        )));
    }
    Ok(())
}

pub fn save_forecast(path: &Path, panel: &ForecastPanel, grid: &GridSpec, time: &TimeIndex) -> Result<()> {
    check_shape(grid, time, panel.dims())?;
    let mut out = header_text(PanelKind::Forecast, panel.model_id(), grid, time);
    for t in 0..panel.days() {
        for (c, v) in panel.day(t).iter().enumerate() {
            out.push_str(&format!("{},{t},{}\n", grid.cell_ids()[c], format_float(*v)));
        }
    }
    write_file(path, &out)
}

pub fn save_observations(path: &Path, obs: &ObservationPanel, grid: &GridSpec, time: &TimeIndex) -> Result<()> {
    check_shape(grid, time, obs.dims())?;
    let mut out = header_text(PanelKind::Observation, "observations", grid, time);
    for t in 0..obs.days() {
        for (c, v) in obs.day(t).iter().enumerate() {
            out.push_str(&format!("{},{t},{v}\n", grid.cell_ids()[c]));
        }
    }
    write_file(path, &out)
}

fn csv_reader(path: &Path) -> Result<csv::Reader<fs::File>> {
    let f = fs::File::open(path).map_err(|e| io_err(path, e))?;
    Ok(csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(f))
}

/// Header names and `(line, record)` rows.
type Records = (Vec<String>, Vec<(usize, csv::StringRecord)>);

fn csv_records(path: &Path) -> Result<Records> {
    let mut rdr = csv_reader(path)?;
    let headers: Vec<String> = rdr
        .headers()
        .map_err(|e| parse_err(path, 1, e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            parse_err(path, line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        out.push((line, rec));
    }
    Ok((headers, out))
}

/// Grid file: `cell_id` alone, or `cell_id,lon_min,lon_max,lat_min,lat_max`.
pub fn load_grid(path: &Path) -> Result<GridSpec> {
    let (headers, records) = csv_records(path)?;
    let geometry = match headers.iter().map(String::as_str).collect::<Vec<_>>().as_slice() {
        ["cell_id"] => false,
        ["cell_id", "lon_min", "lon_max", "lat_min", "lat_max"] => true,
        _ => {
            return Err(parse_err(
                path,
                1,
                format!(
                    "expected columns cell_id[,lon_min,lon_max,lat_min,lat_max], found '{}'",
                    headers.join(",")
                ),
            ))
        }
    };
    let mut ids = Vec::with_capacity(records.len());
    let mut boxes = Vec::with_capacity(records.len());
    for (line, rec) in &records {
        ids.push(rec[0].to_string());
        if geometry {
            let v: Vec<f64> = (1..5)
                .map(|i| parse_float(&rec[i]).map_err(|m| parse_err(path, *line, m)))
                .collect::<Result<_>>()?;
            boxes.push(CellBox::new(v[0], v[1], v[2], v[3]).map_err(|e| parse_err(path, *line, e.to_string()))?);
        }
    }
    if geometry {
        GridSpec::with_geometry(ids, boxes)
    } else {
        GridSpec::new(ids)
    }
}

pub fn save_grid(path: &Path, grid: &GridSpec) -> Result<()> {
    let mut out = String::new();
    match grid.geometry() {
        Some(boxes) => {
            out.push_str("cell_id,lon_min,lon_max,lat_min,lat_max\n");
            for (id, b) in grid.cell_ids().iter().zip(boxes) {
                out.push_str(&format!(
                    "{id},{},{},{},{}\n",
                    format_float(b.lon_min),
                    format_float(b.lon_max),
                    format_float(b.lat_min),
                    format_float(b.lat_max)
                ));
            }
        }
        None => {
            out.push_str("cell_id\n");
            for id in grid.cell_ids() {
                out.push_str(&format!("{id}\n"));
            }
        }
    }
    write_file(path, &out)
}

/// ISO-8601 timestamp: date, date-time with optional fraction, or RFC 3339
/// with an offset (converted to UTC).
pub fn parse_timestamp(s: &str) -> std::result::Result<NaiveDateTime, String> {
    let s = s.trim();
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Ok(dt.naive_utc());
    }
    for fmt in [
        "%Y-%m-%dT%H:%M:%S%.f",
        "%Y-%m-%d %H:%M:%S%.f",
        "%Y-%m-%dT%H:%M",
        "%Y-%m-%d %H:%M",
    ] {
        if let Ok(dt) = NaiveDateTime::parse_from_str(s, fmt) {
            return Ok(dt);
        }
    }
    NaiveDate::parse_from_str(s, "%Y-%m-%d")
        .map(|d| d.and_hms_opt(0, 0, 0).expect("midnight exists"))
        .map_err(|_| format!("unrecognized timestamp '{s}'"))
}

/// Catalog file with columns `time,lon,lat,magnitude`.
pub fn load_catalog(path: &Path) -> Result<Catalog> {
    let (headers, records) = csv_records(path)?;
    if headers != ["time", "lon", "lat", "magnitude"] {
        return Err(parse_err(
            path,
            1,
            format!("expected columns time,lon,lat,magnitude, found '{}'", headers.join(",")),
        ));
    }
    let mut events = Vec::with_capacity(records.len());
    for (line, rec) in &records {
        let time = parse_timestamp(&rec[0]).map_err(|m| parse_err(path, *line, m))?;
        let num = |i: usize| -> Result<f64> {
            let v = parse_float(&rec[i]).map_err(|m| parse_err(path, *line, m))?;
            if !v.is_finite() {
                return Err(parse_err(path, *line, format!("'{}' must be finite", &rec[i])));
            }
            Ok(v)
        };
        events.push(Event {
            time,
            lon: num(1)?,
            lat: num(2)?,
            magnitude: num(3)?,
        });
    }
    Catalog::new(events)
}

pub fn save_catalog(path: &Path, catalog: &Catalog) -> Result<()> {
    let mut out = String::from("time,lon,lat,magnitude\n");
    for e in catalog.events() {
        out.push_str(&format!(
            "{},{},{},{}\n",
            e.time.format("%Y-%m-%dT%H:%M:%S%.f"),
            format_float(e.lon),
            format_float(e.lat),
            format_float(e.magnitude)
        ));
    }
    write_file(path, &out)
}

/// Observations binned from a catalog, with counts of events that were not used.
#[derive(Debug, Clone, PartialEq)]
pub struct BinningReport {
    pub observations: ObservationPanel,
    pub binned_events: usize,
    pub below_threshold: usize,
    pub outside_region: usize,
    pub outside_period: usize,
}

/// Counts each event with `magnitude >= threshold` in every window
/// `[t, t + window_length)` containing its day, in the cell whose half-open
/// box contains its epicentre.
pub fn bin_catalog(
    catalog: &Catalog,
    grid: &GridSpec,
    time: &TimeIndex,
    magnitude_threshold: f64,
) -> Result<BinningReport> {
    let boxes = grid
        .geometry()
        .ok_or_else(|| Error::invalid("binning a catalog needs a grid with cell geometry"))?;
    if !magnitude_threshold.is_finite() {
        return Err(Error::invalid(format!(
            "magnitude threshold {magnitude_threshold} is not finite"
        )));
    }
    let (cells, days) = (grid.len(), time.days());
    let w = time.window_length() as i64;
    let mut counts = vec![0u32; cells * days];
    let mut report = (0, 0, 0, 0);
    for e in catalog.events() {
        if e.magnitude < magnitude_threshold {
            report.1 += 1;
            continue;
        }
        let d = time.offset_of(e.time.date());
        let first = (d - w + 1).max(0);
        let last = d.min(days as i64 - 1);
        if d < 0 || first > last {
            report.3 += 1;
            continue;
        }
        let Some(c) = boxes.iter().position(|b| b.contains(e.lon, e.lat)) else {
            report.2 += 1;
            continue;
        };
        for t in first..=last {
            counts[t as usize * cells + c] += 1;
        }
        report.0 += 1;
    }
    Ok(BinningReport {
        observations: ObservationPanel::new(cells, days, counts)?,
        binned_events: report.0,
        below_threshold: report.1,
        outside_region: report.2,
        outside_period: report.3,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;
    use std::path::PathBuf;

    fn time(days: usize) -> TimeIndex {
        TimeIndex::new(NaiveDate::from_ymd_opt(2024, 1, 1).unwrap(), days, 7).unwrap()
    }

    fn grid2() -> GridSpec {
        GridSpec::with_geometry(
            vec!["a".into(), "b".into()],
            vec![
                CellBox::new(0.0, 1.0, 0.0, 1.0).unwrap(),
                CellBox::new(1.0, 2.0, 0.0, 1.0).unwrap(),
            ],
        )
        .unwrap()
    }

    fn event(date: &str, lon: f64, lat: f64, mag: f64) -> Event {
        Event {
            time: parse_timestamp(date).unwrap(),
            lon,
            lat,
            magnitude: mag,
        }
    }

    #[test]
    fn float_formatting_round_trips() {
        for v in [
            0.0,
            1.0,
            0.1,
            1e-300,
            123456.789,
            std::f64::consts::PI,
            f64::MIN_POSITIVE,
        ] {
            assert_eq!(parse_float(&format_float(v)).unwrap(), v);
        }
        assert_eq!(format_float(f64::INFINITY), "inf");
        assert_eq!(parse_float("inf").unwrap(), f64::INFINITY);
        assert_eq!(format_optional(None), "");
    }

    #[test]
    fn panel_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let g = grid2();
        let tm = time(3);
        let f = ForecastPanel::new("m1", 2, 3, vec![0.1, 0.2, 1.0 / 3.0, 0.0, 1e-9, 7.5]).unwrap();
        let o = ObservationPanel::new(2, 3, vec![0, 1, 2, 0, 0, 5]).unwrap();
        save_forecast(&dir.path().join("f.csv"), &f, &g, &tm).unwrap();
        save_observations(&dir.path().join("o.csv"), &o, &g, &tm).unwrap();
        let (f2, h) = load_forecast(&dir.path().join("f.csv"), &g).unwrap();
        let (o2, _) = load_observations(&dir.path().join("o.csv"), &g).unwrap();
        assert_eq!(f2, f);
        assert_eq!(o2, o);
        assert_eq!(h.time_index().unwrap(), tm);
        assert_eq!(
            grid_from_panel(&dir.path().join("f.csv")).unwrap().cell_ids(),
            g.cell_ids()
        );
    }

    fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
        let p = dir.join(name);
        fs::write(&p, body).unwrap();
        p
    }

    fn header(kind: &str, g: &GridSpec, days: usize) -> String {
        format!(
            "# {MAGIC}\n# kind={kind}\n# model_id=m\n# cells={}\n# days={days}\n# origin=2024-01-01\n# window_length=7\n# grid_checksum={}\ncell_id,day_index,value\n",
            g.len(),
            g.checksum()
        )
    }

    #[test]
    fn duplicate_rows_are_reported() {
        let dir = tempfile::tempdir().unwrap();
        let g = grid2();
        let body = header("observation", &g, 1) + "a,0,1\nb,0,0\na,0,2\n";
        let err = load_observations(&write(dir.path(), "o.csv", &body), &g).unwrap_err();
        match err {
            Error::Parse { line, msg, .. } => {
                assert_eq!(line, 12);
                assert!(msg.contains("duplicate") && msg.contains("'a'"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn missing_forecast_is_error_missing_observation_is_zero() {
        let dir = tempfile::tempdir().unwrap();
        let g = grid2();
        let body = header("forecast", &g, 1) + "a,0,0.5\n";
        assert!(load_forecast(&write(dir.path(), "f.csv", &body), &g).is_err());
        let body = header("observation", &g, 1) + "b,0,3\n";
        let (o, _) = load_observations(&write(dir.path(), "o.csv", &body), &g).unwrap();
        assert_eq!(o.counts(), &[0, 3]);
    }

    #[test]
    fn bad_values_and_checksums_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let g = grid2();
        let body = header("forecast", &g, 1) + "a,0,-0.5\nb,0,1\n";
        assert!(matches!(
            load_forecast(&write(dir.path(), "f.csv", &body), &g),
            Err(Error::Parse { line: 10, .. })
        ));
        let other = GridSpec::new(vec!["b".into(), "a".into()]).unwrap();
        let body = header("forecast", &g, 1) + "a,0,0.5\nb,0,1\n";
        assert!(load_forecast(&write(dir.path(), "f2.csv", &body), &other).is_err());
        let body = header("observation", &g, 1) + "a,0,1.5\n";
        assert!(load_observations(&write(dir.path(), "o.csv", &body), &g).is_err());
    }

    #[test]
    fn grid_and_catalog_files() {
        let dir = tempfile::tempdir().unwrap();
        let g = grid2();
        save_grid(&dir.path().join("g.csv"), &g).unwrap();
        let g2 = load_grid(&dir.path().join("g.csv")).unwrap();
        assert_eq!(g2, g);
        assert_eq!(g2.geometry(), g.geometry());
        let p = write(
            dir.path(),
            "c.csv",
            "time,lon,lat,magnitude\n2024-01-02T03:04:05Z,0.5,0.5,4.2\n2024-01-01,1.5,0.5,3.9\n",
        );
        let c = load_catalog(&p).unwrap();
        assert_eq!(c.len(), 2);
        assert_eq!(c.events()[0].magnitude, 3.9);
        save_catalog(&dir.path().join("c2.csv"), &c).unwrap();
        assert_eq!(load_catalog(&dir.path().join("c2.csv")).unwrap(), c);
        let bad = write(dir.path(), "bad.csv", "time,lon,lat,magnitude\nyesterday,0,0,4\n");
        assert!(matches!(load_catalog(&bad), Err(Error::Parse { line: 2, .. })));
    }

    #[test]
    fn overlapping_grid_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            dir.path(),
            "g.csv",
            "cell_id,lon_min,lon_max,lat_min,lat_max\na,0,1,0,1\nb,0.5,1.5,0,1\n",
        );
        assert!(load_grid(&p).is_err());
    }

    #[test]
    fn single_event_window_counts() {
        let g = grid2();
        let tm = time(20);
        let cat = Catalog::new(vec![event("2024-01-11T12:00:00", 0.2, 0.2, 4.5)]).unwrap();
        let r = bin_catalog(&cat, &g, &tm, 4.0).unwrap();
        assert_eq!(r.observations.total(), 7);
        let windows: Vec<usize> = (0..20).filter(|&t| r.observations.get(0, t) == 1).collect();
        assert_eq!(windows, (4..=10).collect::<Vec<_>>());

        // near the end of the period only the windows that exist count it
        let cat = Catalog::new(vec![event("2024-01-19", 0.2, 0.2, 4.5)]).unwrap();
        assert_eq!(bin_catalog(&cat, &g, &tm, 4.0).unwrap().observations.total(), 7);
        // after the last day, events still fall in the trailing windows
        let cat = Catalog::new(vec![event("2024-01-22", 0.2, 0.2, 4.5)]).unwrap();
        assert_eq!(bin_catalog(&cat, &g, &tm, 4.0).unwrap().observations.total(), 5);
    }

    #[test]
    fn boundary_and_exclusions() {
        let g = grid2();
        let tm = time(10);
        let cat = Catalog::new(vec![
            event("2024-01-05", 1.0, 0.5, 5.0),
            event("2024-01-05", 0.5, 0.5, 3.9),
            event("2024-01-05", 5.0, 0.5, 5.0),
            event("2023-12-31", 0.5, 0.5, 5.0),
            event("2024-02-01", 0.5, 0.5, 5.0),
        ])
        .unwrap();
        let r = bin_catalog(&cat, &g, &tm, 4.0).unwrap();
        assert_eq!(
            (r.binned_events, r.below_threshold, r.outside_region, r.outside_period),
            (1, 1, 1, 2)
        );
        assert!((0..10).all(|t| r.observations.get(0, t) == 0));
        assert_eq!(r.observations.total(), 5);
    }

    #[test]
    fn binning_needs_geometry() {
        let g = GridSpec::new(vec!["a".into()]).unwrap();
        assert!(bin_catalog(&Catalog::default(), &g, &time(3), 4.0).is_err());
    }
}
