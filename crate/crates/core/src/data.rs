//! Match and odds ingestion.
//!
//! Input files follow the football-data.co.uk column convention, one file per
//! league season. Odds columns are `<bookmaker><H|D|A>`, e.g. `B365H`.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::odds::{self, DecimalOddsTriple, OddsTriple, ProbMethod, ProbTriple};
use crate::skellam::{self, RatePair};

pub const DEFAULT_BOOKMAKERS: [&str; 7] = ["B365", "BW", "IW", "LB", "SB", "VC", "WH"];
const AUGMENTED_MAGIC: &str = "#oddsmix-augmented";
const AUGMENTED_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("line {line}: {reason}")]
    UnparseableRow { line: usize, reason: String },
    #[error("unknown season {0}")]
    UnknownSeason(usize),
    #[error("test season {0} has no earlier seasons to train on")]
    EmptyTrain(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeagueConfig {
    /// Bookmaker column prefixes, in the order implicit rates are stored.
    pub bookmakers: Vec<String>,
}

impl Default for LeagueConfig {
    fn default() -> Self {
        Self { bookmakers: DEFAULT_BOOKMAKERS.iter().map(|s| s.to_string()).collect() }
    }
}

/// Bidirectional team name table; indices are assigned in order of first appearance.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TeamTable {
    names: Vec<String>,
    index: HashMap<String, usize>,
}

impl TeamTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_names<I: IntoIterator<Item = String>>(names: I) -> Self {
        let mut t = Self::new();
        for n in names {
            t.intern(&n);
        }
        t
    }

    pub fn intern(&mut self, name: &str) -> usize {
        if let Some(&i) = self.index.get(name) {
            return i;
        }
        let i = self.names.len();
        self.names.push(name.to_string());
        self.index.insert(name.to_string(), i);
        i
    }

    pub fn get(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn name(&self, index: usize) -> &str {
        &self.names[index]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchRecord {
    pub season: usize,
    pub date: Option<NaiveDate>,
    pub home: usize,
    pub away: usize,
    pub goals_home: u32,
    pub goals_away: u32,
    /// Quoted odds per bookmaker, `None` where the file has no valid quote.
    pub odds: Vec<Option<DecimalOddsTriple>>,
}

/// One parsed CSV row, before team indexing. Scores may be missing.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvRow {
    pub line: usize,
    pub date: Option<NaiveDate>,
    pub home: String,
    pub away: String,
    pub goals: Option<(u32, u32)>,
    pub odds: Vec<Option<DecimalOddsTriple>>,
    /// Bookmakers whose cells were present but not valid decimal odds.
    pub invalid_odds: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadedSeason {
    pub records: Vec<MatchRecord>,
    pub dropped_rows: usize,
    pub invalid_odds: usize,
}

struct Columns {
    date: Option<usize>,
    home: usize,
    away: usize,
    fthg: usize,
    ftag: usize,
    odds: Vec<Option<[usize; 3]>>,
}

impl Columns {
    fn from_header(header: &csv::StringRecord, config: &LeagueConfig) -> Result<Self, DataError> {
        let pos: HashMap<&str, usize> = header.iter().enumerate().map(|(i, h)| (h.trim(), i)).collect();
        let need = |name: &str| {
            pos.get(name).copied().ok_or_else(|| DataError::MalformedHeader(format!("missing column `{name}`")))
        };
        let odds = config
            .bookmakers
            .iter()
            .map(|b| {
                let cols = ["H", "D", "A"].map(|s| pos.get(format!("{b}{s}").as_str()).copied());
                match cols {
                    [Some(h), Some(d), Some(a)] => Some([h, d, a]),
                    _ => None,
                }
            })
            .collect();
        Ok(Self {
            date: pos.get("Date").copied(),
            home: need("HomeTeam")?,
            away: need("AwayTeam")?,
            fthg: need("FTHG")?,
            ftag: need("FTAG")?,
            odds,
        })
    }
}

pub fn parse_date(s: &str) -> Option<NaiveDate> {
    let s = s.trim();
    ["%d/%m/%Y", "%d/%m/%y", "%Y-%m-%d"].iter().find_map(|f| {
        // `%Y` happily accepts two-digit years, so insist on four digits.
        if *f == "%d/%m/%Y" && s.rsplit('/').next().map(str::len) != Some(4) {
            return None;
        }
        NaiveDate::parse_from_str(s, f).ok()
    })
}

fn parse_goal(s: &str, line: usize, what: &str) -> Result<Option<u32>, DataError> {
    let s = s.trim();
    if s.is_empty() {
        return Ok(None);
    }
    s.parse::<u32>()
        .map(Some)
        .map_err(|_| DataError::UnparseableRow { line, reason: format!("{what} `{s}` is not a goal count") })
}

/// Parses all data rows of a football-data style CSV.
pub fn parse_rows<R: Read>(reader: R, config: &LeagueConfig) -> Result<Vec<CsvRow>, DataError> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).trim(csv::Trim::All).from_reader(reader);
    let header = rdr.headers().map_err(|e| DataError::MalformedHeader(e.to_string()))?.clone();
    let cols = Columns::from_header(&header, config)?;
    let mut rows = Vec::new();
    for result in rdr.records() {
        let rec = result.map_err(|e| DataError::UnparseableRow {
            line: e.position().map(|p| p.line() as usize).unwrap_or(0),
            reason: e.to_string(),
        })?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        if rec.iter().all(|f| f.is_empty()) {
            continue;
        }
        let field = |i: usize| rec.get(i).unwrap_or("");
        let home = field(cols.home).to_string();
        let away = field(cols.away).to_string();
        if home.is_empty() || away.is_empty() {
            return Err(DataError::UnparseableRow { line, reason: "missing team name".into() });
        }
        if home == away {
            return Err(DataError::UnparseableRow { line, reason: format!("team `{home}` plays itself") });
        }
        let date = match cols.date.map(field) {
            None | Some("") => None,
            Some(s) => Some(parse_date(s).ok_or_else(|| DataError::UnparseableRow {
                line,
                reason: format!("unrecognised date `{s}`"),
            })?),
        };
        let goals = match (parse_goal(field(cols.fthg), line, "FTHG")?, parse_goal(field(cols.ftag), line, "FTAG")?) {
            (Some(h), Some(a)) => Some((h, a)),
            _ => None,
        };
        let mut invalid_odds = 0;
        let mut odds = Vec::with_capacity(cols.odds.len());
        for idx in &cols.odds {
            let Some(idx) = idx else {
                odds.push(None);
                continue;
            };
            let cells = idx.map(field);
            if cells.iter().any(|c| c.is_empty()) {
                odds.push(None);
                continue;
            }
            let mut values = [0.0; 3];
            for (v, c) in values.iter_mut().zip(cells) {
                *v = c.parse::<f64>().map_err(|_| DataError::UnparseableRow {
                    line,
                    reason: format!("odds cell `{c}` is not a number"),
                })?;
            }
            match DecimalOddsTriple::new(values[0], values[1], values[2]) {
                Ok(d) => odds.push(Some(d)),
                Err(e) => {
                    log::warn!("line {line}: {e}; bookmaker quote ignored");
                    invalid_odds += 1;
                    odds.push(None);
                }
            }
        }
        rows.push(CsvRow { line, date, home, away, goals, odds, invalid_odds });
    }
    Ok(rows)
}

/// Loads one season file. Rows without a final score are dropped and counted.
pub fn load_csv(
    path: &Path,
    config: &LeagueConfig,
    season: usize,
    teams: &mut TeamTable,
) -> Result<LoadedSeason, DataError> {
    let file = std::fs::File::open(path)?;
    load_season(file, config, season, teams)
}

pub fn load_season<R: Read>(
    reader: R,
    config: &LeagueConfig,
    season: usize,
    teams: &mut TeamTable,
) -> Result<LoadedSeason, DataError> {
    let rows = parse_rows(reader, config)?;
    let mut records = Vec::with_capacity(rows.len());
    let mut dropped_rows = 0;
    let mut invalid_odds = 0;
    for row in rows {
        invalid_odds += row.invalid_odds;
        let Some((goals_home, goals_away)) = row.goals else {
            dropped_rows += 1;
            continue;
        };
        records.push(MatchRecord {
            season,
            date: row.date,
            home: teams.intern(&row.home),
            away: teams.intern(&row.away),
            goals_home,
            goals_away,
            odds: row.odds,
        });
    }
    if dropped_rows > 0 {
        log::warn!("season {season}: dropped {dropped_rows} rows without a final score");
    }
    // Stable sort keeps file order for equal dates.
    records.sort_by_key(|r| r.date);
    Ok(LoadedSeason { records, dropped_rows, invalid_odds })
}

/// A match with the implicit scoring rates of each bookmaker attached.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentedMatch {
    pub record: MatchRecord,
    pub probs: Vec<Option<ProbTriple>>,
    pub implicit: Vec<Option<RatePair>>,
}

impl AugmentedMatch {
    /// Match with no bookmaker information.
    pub fn bare(record: MatchRecord) -> Self {
        let n = record.odds.len();
        Self { record, probs: vec![None; n], implicit: vec![None; n] }
    }

    pub fn implicit_rates(&self) -> impl Iterator<Item = &RatePair> {
        self.implicit.iter().flatten()
    }

    /// Bookmaker-average probability triple over the bookmakers with quotes.
    pub fn mean_probs(&self) -> Option<ProbTriple> {
        let quotes: Vec<_> = self.probs.iter().flatten().collect();
        if quotes.is_empty() {
            return None;
        }
        let n = quotes.len() as f64;
        let mut acc = [0.0; 3];
        for q in quotes {
            for (a, v) in acc.iter_mut().zip(q.as_array()) {
                *a += v;
            }
        }
        Some(ProbTriple::from_array(acc.map(|a| a / n)).renormalized())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttachStats {
    pub quotes: usize,
    pub attached: usize,
    pub conversion_failures: usize,
    pub inversion_failures: usize,
}

/// Converts every bookmaker quote to probabilities and inverts them to
/// implicit rates. Per-quote failures leave that bookmaker absent.
pub fn attach_implicit_rates(records: Vec<MatchRecord>, method: ProbMethod) -> (Vec<AugmentedMatch>, AttachStats) {
    let converted: Vec<(AugmentedMatch, AttachStats)> = records
        .into_par_iter()
        .map(|record| {
            let mut stats = AttachStats::default();
            let mut probs = Vec::with_capacity(record.odds.len());
            let mut implicit = Vec::with_capacity(record.odds.len());
            for quote in &record.odds {
                let Some(d) = quote else {
                    probs.push(None);
                    implicit.push(None);
                    continue;
                };
                stats.quotes += 1;
                let p = match odds::decimal_to_probs(*d, method) {
                    Ok(p) => p,
                    Err(e) => {
                        log::debug!("odds conversion failed: {e}");
                        stats.conversion_failures += 1;
                        probs.push(None);
                        implicit.push(None);
                        continue;
                    }
                };
                probs.push(Some(p));
                match skellam::implicit_rates(p, None) {
                    Ok(r) => {
                        stats.attached += 1;
                        implicit.push(Some(r));
                    }
                    Err(e) => {
                        log::debug!("rate inversion failed: {e}");
                        stats.inversion_failures += 1;
                        implicit.push(None);
                    }
                }
            }
            (AugmentedMatch { record, probs, implicit }, stats)
        })
        .collect();

    let mut total = AttachStats::default();
    let matches = converted
        .into_iter()
        .map(|(m, s)| {
            total.quotes += s.quotes;
            total.attached += s.attached;
            total.conversion_failures += s.conversion_failures;
            total.inversion_failures += s.inversion_failures;
            m
        })
        .collect();
    (matches, total)
}

/// Convenience wrapper for a single quote.
pub fn quote_to_rates(d: DecimalOddsTriple, method: ProbMethod) -> Option<(ProbTriple, RatePair)> {
    let p = odds::decimal_to_probs(d, method).ok()?;
    let r = skellam::implicit_rates(p, None).ok()?;
    Some((p, r))
}

/// Decimal odds whose inverse sums to `booksum` and normalize back to `probs`.
pub fn odds_with_margin(probs: ProbTriple, booksum: f64) -> DecimalOddsTriple {
    let o = OddsTriple::new(probs.win * booksum, probs.draw * booksum, probs.loss * booksum);
    DecimalOddsTriple { win: 1.0 / o.win, draw: 1.0 / o.draw, loss: 1.0 / o.loss }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub matches: Vec<AugmentedMatch>,
    pub teams: TeamTable,
    /// Season labels; a match's `season` indexes into this list.
    pub seasons: Vec<String>,
    pub bookmakers: Vec<String>,
    pub method: ProbMethod,
}

impl Dataset {
    pub fn n_teams(&self) -> usize {
        self.teams.len()
    }

    pub fn n_seasons(&self) -> usize {
        self.seasons.len()
    }

    pub fn n_bookmakers(&self) -> usize {
        self.bookmakers.len()
    }

    pub fn len(&self) -> usize {
        self.matches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.matches.is_empty()
    }

    /// Loads one file per season, in order, and attaches implicit rates.
    pub fn from_files<P: AsRef<Path>>(
        files: &[(String, P)],
        config: &LeagueConfig,
        method: ProbMethod,
    ) -> Result<(Self, AttachStats), DataError> {
        let mut teams = TeamTable::new();
        let mut records = Vec::new();
        for (season, (_, path)) in files.iter().enumerate() {
            let loaded = load_csv(path.as_ref(), config, season, &mut teams)?;
            records.extend(loaded.records);
        }
        let (matches, stats) = attach_implicit_rates(records, method);
        let ds = Dataset {
            matches,
            teams,
            seasons: files.iter().map(|(l, _)| l.clone()).collect(),
            bookmakers: config.bookmakers.clone(),
            method,
        };
        Ok((ds, stats))
    }

    /// Training view (all seasons before `test_season`) and test view
    /// (exactly `test_season`). Later seasons are excluded from both.
    pub fn split_by_season(&self, test_season: usize) -> Result<(Dataset, Dataset), DataError> {
        if test_season >= self.n_seasons() {
            return Err(DataError::UnknownSeason(test_season));
        }
        if test_season == 0 {
            return Err(DataError::EmptyTrain(test_season));
        }
        let pick = |keep: &dyn Fn(usize) -> bool, n_seasons: usize| Dataset {
            matches: self.matches.iter().filter(|m| keep(m.record.season)).cloned().collect(),
            teams: self.teams.clone(),
            seasons: self.seasons[..n_seasons].to_vec(),
            bookmakers: self.bookmakers.clone(),
            method: self.method,
        };
        let train = pick(&|s| s < test_season, test_season);
        let test = pick(&|s| s == test_season, test_season + 1);
        Ok((train, test))
    }

    pub fn write_augmented<W: Write>(&self, mut w: W) -> Result<(), DataError> {
        let mut out = String::new();
        let join = |xs: &[String]| xs.join("\t");
        for name in self.teams.names().iter().chain(&self.seasons).chain(&self.bookmakers) {
            if name.contains(['\t', '\n']) {
                return Err(DataError::MalformedHeader(format!("label `{name}` contains a tab or newline")));
            }
        }
        writeln!(out, "{AUGMENTED_MAGIC}\t{AUGMENTED_VERSION}").unwrap();
        writeln!(out, "#method\t{}", self.method).unwrap();
        writeln!(out, "#seasons\t{}", join(&self.seasons)).unwrap();
        writeln!(out, "#teams\t{}", join(self.teams.names())).unwrap();
        writeln!(out, "#bookmakers\t{}", join(&self.bookmakers)).unwrap();
        let mut header = vec!["season", "date", "home", "away", "goals_home", "goals_away"]
            .into_iter()
            .map(String::from)
            .collect::<Vec<_>>();
        for b in &self.bookmakers {
            for suffix in ["H", "D", "A", "p_win", "p_draw", "p_loss", "rate_home", "rate_away"] {
                header.push(format!("{b}_{suffix}"));
            }
        }
        writeln!(out, "{}", header.join("\t")).unwrap();
        for m in &self.matches {
            let r = &m.record;
            let date = r.date.map(|d| d.format("%Y-%m-%d").to_string()).unwrap_or_else(|| "NA".into());
            write!(
                out,
                "{}\t{}\t{}\t{}\t{}\t{}",
                r.season,
                date,
                self.teams.name(r.home),
                self.teams.name(r.away),
                r.goals_home,
                r.goals_away
            )
            .unwrap();
            for s in 0..self.bookmakers.len() {
                let mut cells: Vec<String> = Vec::with_capacity(8);
                match r.odds.get(s).copied().flatten() {
                    Some(d) => cells.extend(d.as_array().iter().map(|v| v.to_string())),
                    None => cells.extend(["NA"; 3].map(String::from)),
                }
                match m.probs.get(s).copied().flatten() {
                    Some(p) => cells.extend(p.as_array().iter().map(|v| v.to_string())),
                    None => cells.extend(["NA"; 3].map(String::from)),
                }
                match m.implicit.get(s).copied().flatten() {
                    Some(rt) => cells.extend([rt.home.to_string(), rt.away.to_string()]),
                    None => cells.extend(["NA"; 2].map(String::from)),
                }
                write!(out, "\t{}", cells.join("\t")).unwrap();
            }
            out.push('\n');
        }
        w.write_all(out.as_bytes())?;
        Ok(())
    }

    pub fn read_augmented<R: Read>(reader: R) -> Result<Self, DataError> {
        let mut lines = BufReader::new(reader).lines().enumerate();
        let mut next_line = |expect: &str| -> Result<(usize, Vec<String>), DataError> {
            let (i, line) = lines
                .next()
                .ok_or_else(|| DataError::MalformedHeader(format!("missing `{expect}` line")))?;
            let line = line?;
            Ok((i + 1, line.split('\t').map(String::from).collect()))
        };
        let (_, magic) = next_line(AUGMENTED_MAGIC)?;
        if magic.first().map(String::as_str) != Some(AUGMENTED_MAGIC) {
            return Err(DataError::MalformedHeader("not an augmented dataset file".into()));
        }
        if magic.get(1).and_then(|v| v.parse::<u32>().ok()) != Some(AUGMENTED_VERSION) {
            return Err(DataError::MalformedHeader(format!("unsupported version {:?}", magic.get(1))));
        }
        let mut tagged = |tag: &str| -> Result<Vec<String>, DataError> {
            let (_, mut fields) = next_line(tag)?;
            if fields.first().map(String::as_str) != Some(tag) {
                return Err(DataError::MalformedHeader(format!("expected `{tag}`")));
            }
            fields.remove(0);
            fields.retain(|f| !f.is_empty());
            Ok(fields)
        };
        let method: ProbMethod = tagged("#method")?
            .first()
            .ok_or_else(|| DataError::MalformedHeader("empty method".into()))?
            .parse()
            .map_err(DataError::MalformedHeader)?;
        let seasons = tagged("#seasons")?;
        let teams = TeamTable::from_names(tagged("#teams")?);
        let bookmakers = tagged("#bookmakers")?;
        let (_, header) = next_line("column header")?;
        if header.len() != 6 + 8 * bookmakers.len() {
            return Err(DataError::MalformedHeader("column count does not match bookmakers".into()));
        }

        let mut matches = Vec::new();
        for (i, line) in lines {
            let line = line?;
            let lineno = i + 1;
            if line.is_empty() {
                continue;
            }
            let bad = |reason: String| DataError::UnparseableRow { line: lineno, reason };
            let f: Vec<&str> = line.split('\t').collect();
            if f.len() != header.len() {
                return Err(bad(format!("expected {} fields, found {}", header.len(), f.len())));
            }
            let num = |s: &str| -> Result<Option<f64>, DataError> {
                if s == "NA" {
                    Ok(None)
                } else {
                    s.parse::<f64>().map(Some).map_err(|_| bad(format!("`{s}` is not a number")))
                }
            };
            let int = |s: &str| s.parse::<u32>().map_err(|_| bad(format!("`{s}` is not an integer")));
            let team = |s: &str| teams.get(s).ok_or_else(|| bad(format!("unknown team `{s}`")));
            let season = int(f[0])? as usize;
            if season >= seasons.len() {
                return Err(bad(format!("season {season} out of range")));
            }
            let date = if f[1] == "NA" {
                None
            } else {
                Some(NaiveDate::parse_from_str(f[1], "%Y-%m-%d").map_err(|_| bad(format!("bad date `{}`", f[1])))?)
            };
            let mut odds = Vec::new();
            let mut probs = Vec::new();
            let mut implicit = Vec::new();
            for s in 0..bookmakers.len() {
                let c = &f[6 + 8 * s..6 + 8 * (s + 1)];
                let v: Vec<Option<f64>> = c.iter().map(|x| num(x)).collect::<Result<_, _>>()?;
                odds.push(match (v[0], v[1], v[2]) {
                    (Some(a), Some(b), Some(c)) => Some(DecimalOddsTriple { win: a, draw: b, loss: c }),
                    _ => None,
                });
                probs.push(match (v[3], v[4], v[5]) {
                    (Some(a), Some(b), Some(c)) => Some(ProbTriple::new(a, b, c)),
                    _ => None,
                });
                implicit.push(match (v[6], v[7]) {
                    (Some(a), Some(b)) => Some(RatePair { home: a, away: b }),
                    _ => None,
                });
            }
            matches.push(AugmentedMatch {
                record: MatchRecord {
                    season,
                    date,
                    home: team(f[2])?,
                    away: team(f[3])?,
                    goals_home: int(f[4])?,
                    goals_away: int(f[5])?,
                    odds,
                },
                probs,
                implicit,
            });
        }
        Ok(Dataset { matches, teams, seasons, bookmakers, method })
    }
}
