//! Sightseeing-spot catalog: CSV ingestion, genre-to-theme grouping and
//! proximity-based selection of spots to introduce.

use std::cmp::Ordering;
use std::collections::{HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::text::{count_phrase, find_phrase};

/// Mean Earth radius (IUGG) in kilometres.
pub const EARTH_RADIUS_KM: f64 = 6371.0088;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Theme {
    History,
    Nature,
    Others,
}

impl Theme {
    pub const ALL: [Theme; 3] = [Theme::History, Theme::Nature, Theme::Others];

    pub fn as_str(self) -> &'static str {
        match self {
            Theme::History => "History",
            Theme::Nature => "Nature",
            Theme::Others => "Others",
        }
    }

    /// Lowercase phrase for use in sentences.
    pub fn describe(self) -> &'static str {
        match self {
            Theme::History => "history",
            Theme::Nature => "nature",
            Theme::Others => "local culture and food",
        }
    }
}

impl fmt::Display for Theme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Theme {
    type Err = ();
    fn from_str(s: &str) -> Result<Self, ()> {
        Theme::ALL
            .into_iter()
            .find(|t| t.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    pub lat: f64,
    pub lon: f64,
}

impl GeoPoint {
    pub fn new(lat: f64, lon: f64) -> Self {
        GeoPoint { lat, lon }
    }
}

/// Great-circle distance by the haversine formula.
pub fn haversine_km(a: GeoPoint, b: GeoPoint) -> f64 {
    let (phi1, phi2) = (a.lat.to_radians(), b.lat.to_radians());
    let d_phi = (b.lat - a.lat).to_radians();
    let d_lambda = (b.lon - a.lon).to_radians();
    let h = (d_phi / 2.0).sin().powi(2) + phi1.cos() * phi2.cos() * (d_lambda / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_KM * h.sqrt().min(1.0).asin()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spot {
    pub id: String,
    pub name: String,
    pub genre: String,
    pub theme: Theme,
    pub lat: f64,
    pub lon: f64,
    pub popularity: u32,
    pub description: String,
}

impl Spot {
    pub fn location(&self) -> GeoPoint {
        GeoPoint::new(self.lat, self.lon)
    }
}

#[derive(Debug, Error)]
pub enum SpotError {
    #[error("catalog line {line}: {message}")]
    Malformed { line: u64, message: String },
    #[error("catalog line {line}: {field} out of range")]
    OutOfRange { line: u64, field: &'static str },
    #[error("catalog line {line}: duplicate spot id `{id}`")]
    DuplicateId { line: u64, id: String },
    #[error("genre map line {line}: {message}")]
    GenreMap { line: usize, message: String },
    #[error("not enough {theme} spots to introduce: {available} available")]
    InsufficientSpots { theme: Theme, available: usize },
}

/// Genre name (case-insensitive) to theme. Unmapped genres are Others.
#[derive(Debug, Clone, Default)]
pub struct GenreMap {
    map: HashMap<String, Theme>,
}

impl GenreMap {
    /// Lines of `genre<TAB>theme`; `#` comments and blank lines skipped.
    pub fn parse(text: &str) -> Result<Self, SpotError> {
        let mut map = HashMap::new();
        for (idx, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let (genre, theme) = line.split_once('\t').ok_or_else(|| SpotError::GenreMap {
                line: idx + 1,
                message: "expected `genre<TAB>theme`".into(),
            })?;
            let theme: Theme = theme.parse().map_err(|_| SpotError::GenreMap {
                line: idx + 1,
                message: format!("unknown theme `{}`", theme.trim()),
            })?;
            map.insert(genre.trim().to_lowercase(), theme);
        }
        Ok(GenreMap { map })
    }

    pub fn theme_of(&self, genre: &str) -> Theme {
        self.map
            .get(&genre.trim().to_lowercase())
            .copied()
            .unwrap_or(Theme::Others)
    }
}

#[derive(Debug, Deserialize)]
struct CatalogRow {
    id: String,
    name: String,
    genre: String,
    lat: f64,
    lon: f64,
    #[serde(default)]
    popularity: Option<u32>,
    #[serde(default)]
    description: String,
}

/// A spot name found in some text.
#[derive(Debug, Clone, Copy)]
pub struct Mention<'a> {
    pub spot: &'a Spot,
    pub first_offset: usize,
    pub count: usize,
}

#[derive(Debug, Clone, Default)]
pub struct SpotCatalog {
    spots: Vec<Spot>,
    index: HashMap<String, usize>,
}

impl SpotCatalog {
    /// Reads the catalog CSV (`id,name,genre,lat,lon,popularity,description`).
    /// A missing popularity defaults to 0.
    pub fn load(csv_text: &str, genres: &GenreMap) -> Result<Self, SpotError> {
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(csv_text.as_bytes());
        let headers = reader
            .headers()
            .map_err(|e| SpotError::Malformed {
                line: 1,
                message: e.to_string(),
            })?
            .clone();
        let mut catalog = SpotCatalog::default();
        for record in reader.records() {
            let record = record.map_err(|e| SpotError::Malformed {
                line: e.position().map_or(0, |p| p.line()),
                message: e.to_string(),
            })?;
            let line = record.position().map_or(0, |p| p.line());
            let row: CatalogRow = record.deserialize(Some(&headers)).map_err(|e| SpotError::Malformed {
                line,
                message: e.to_string(),
            })?;
            if !(-90.0..=90.0).contains(&row.lat) {
                return Err(SpotError::OutOfRange { line, field: "lat" });
            }
            if !(-180.0..=180.0).contains(&row.lon) {
                return Err(SpotError::OutOfRange { line, field: "lon" });
            }
            if row.id.is_empty() {
                return Err(SpotError::Malformed {
                    line,
                    message: "empty id".into(),
                });
            }
            let spot = Spot {
                theme: genres.theme_of(&row.genre),
                id: row.id,
                name: row.name,
                genre: row.genre,
                lat: row.lat,
                lon: row.lon,
                popularity: row.popularity.unwrap_or(0),
                description: row.description,
            };
            catalog.insert(spot).map_err(|id| SpotError::DuplicateId { line, id })?;
        }
        Ok(catalog)
    }

    pub fn from_spots(spots: impl IntoIterator<Item = Spot>) -> Result<Self, SpotError> {
        let mut catalog = SpotCatalog::default();
        for (i, spot) in spots.into_iter().enumerate() {
            catalog
                .insert(spot)
                .map_err(|id| SpotError::DuplicateId { line: i as u64 + 1, id })?;
        }
        Ok(catalog)
    }

    fn insert(&mut self, spot: Spot) -> Result<(), String> {
        if self.index.contains_key(&spot.id) {
            return Err(spot.id);
        }
        self.index.insert(spot.id.clone(), self.spots.len());
        self.spots.push(spot);
        Ok(())
    }

    pub fn get(&self, id: &str) -> Option<&Spot> {
        self.index.get(id).map(|&i| &self.spots[i])
    }

    pub fn spots(&self) -> &[Spot] {
        &self.spots
    }

    pub fn len(&self) -> usize {
        self.spots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spots.is_empty()
    }

    /// Exact name lookup ignoring case and punctuation.
    pub fn find_by_name(&self, name: &str) -> Option<&Spot> {
        let wanted = crate::text::padded_tokens(name);
        self.spots
            .iter()
            .find(|s| crate::text::padded_tokens(&s.name) == wanted)
    }

    /// Catalog spots whose names occur in `text` on token boundaries,
    /// ordered by first occurrence. A name nested inside a longer matched
    /// name at the same place is not reported separately.
    pub fn mentions(&self, text: &str) -> Vec<Mention<'_>> {
        let mut found: Vec<Mention<'_>> = self
            .spots
            .iter()
            .filter_map(|spot| {
                find_phrase(text, &spot.name).map(|first_offset| Mention {
                    spot,
                    first_offset,
                    count: count_phrase(text, &spot.name),
                })
            })
            .collect();
        let snapshot = found.clone();
        found.retain(|m| {
            !snapshot.iter().any(|other| {
                other.spot.name.len() > m.spot.name.len()
                    && crate::text::contains_phrase(&other.spot.name, &m.spot.name)
                    && other.count >= m.count
            })
        });
        found.sort_by(|a, b| a.first_offset.cmp(&b.first_offset).then_with(|| a.spot.id.cmp(&b.spot.id)));
        found
    }
}

/// Picks `k` unvisited spots of `theme` to introduce.
///
/// The seed is the desired spot when it is in the catalog, unvisited and of
/// the theme; otherwise the most popular eligible spot (ties by id). The
/// remaining `k - 1` are the seed's nearest eligible neighbours. Result
/// order: seed first, then ascending distance, ties by id.
pub fn select_introduction_spots<'a>(
    catalog: &'a SpotCatalog,
    theme: Theme,
    visited: &HashSet<String>,
    desired: Option<&str>,
    k: usize,
) -> Result<Vec<&'a Spot>, SpotError> {
    let eligible: Vec<&Spot> = catalog
        .spots()
        .iter()
        .filter(|s| s.theme == theme && !visited.contains(&s.id))
        .collect();
    if eligible.len() < k || k == 0 {
        return Err(SpotError::InsufficientSpots {
            theme,
            available: eligible.len(),
        });
    }
    let seed = desired
        .and_then(|id| eligible.iter().find(|s| s.id == id).copied())
        .unwrap_or_else(|| {
            eligible
                .iter()
                .copied()
                .max_by(|a, b| a.popularity.cmp(&b.popularity).then_with(|| b.id.cmp(&a.id)))
                .expect("eligible is non-empty")
        });
    let origin = seed.location();
    let mut neighbours: Vec<(f64, &Spot)> = eligible
        .iter()
        .filter(|s| s.id != seed.id)
        .map(|s| (haversine_km(origin, s.location()), *s))
        .collect();
    neighbours.sort_by(|(da, a), (db, b)| da.partial_cmp(db).unwrap_or(Ordering::Equal).then_with(|| a.id.cmp(&b.id)));
    Ok(std::iter::once(seed)
        .chain(neighbours.into_iter().take(k - 1).map(|(_, s)| s))
        .collect())
}
