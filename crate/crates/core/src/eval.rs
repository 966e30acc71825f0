//! Measurement protocols: accuracy by bidding position, winning shares over
//! full games, and CSV / plot-data output.
//!
//! Every simulated round `i` draws from its own stream `stream(seed, i)`, so
//! reports do not depend on how rounds are spread over worker threads.
//!
//! Accuracy CSV columns: `round, seed, rounds_per_position, scope, index,
//! agent, rounds, hits, points, accuracy, half_width_99, mean_points`.
//! `scope = position` rows describe seat 0 at bidding position `index`;
//! `scope = seat` rows pool all positions for seat `index`.
//!
//! Winning-share CSV columns: `max_round, games, seed, seat, agent,
//! wins_twelfths, share, total_points, mean_points`. Wins are counted in
//! twelfths of a game so that split ties sum exactly.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::agents::Agent;
use crate::env::{play_round, Policy};
use crate::error::{Error, Result};
use crate::game::{deal, NUM_PLAYERS};
use crate::rng::{stream, uniform_index};
use crate::train::ProgressRow;

/// Two-sided 99% standard normal quantile.
pub const Z99: f64 = 2.5758293035489004;
/// Win units per game; divisible by every possible number of tied winners.
pub const WIN_UNITS: u64 = 12;

#[derive(Copy, Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tally {
    pub rounds: u64,
    pub hits: u64,
    pub points: i64,
}

impl Tally {
    pub fn record(&mut self, hit: bool, points: i32) {
        self.rounds += 1;
        self.hits += hit as u64;
        self.points += points as i64;
    }

    pub fn merge(&mut self, other: &Tally) {
        self.rounds += other.rounds;
        self.hits += other.hits;
        self.points += other.points;
    }

    pub fn accuracy(&self) -> f64 {
        if self.rounds == 0 {
            0.0
        } else {
            self.hits as f64 / self.rounds as f64
        }
    }

    /// Normal-approximation 99% half-width of the accuracy.
    pub fn half_width(&self) -> f64 {
        if self.rounds == 0 {
            return 0.0;
        }
        let p = self.accuracy();
        Z99 * (p * (1.0 - p) / self.rounds as f64).sqrt()
    }

    pub fn mean_points(&self) -> f64 {
        if self.rounds == 0 {
            0.0
        } else {
            self.points as f64 / self.rounds as f64
        }
    }
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if workers > 0 {
        b = b.num_threads(workers);
    }
    b.build().map_err(|e| Error::Invalid(format!("thread pool: {e}")))
}

/// Splits `0..n` into contiguous chunks, runs `job` on each in parallel and
/// folds the results in chunk order.
fn parallel_chunks<T: Send>(
    n: u64,
    workers: usize,
    job: impl Fn(std::ops::Range<u64>) -> Result<T> + Sync,
) -> Result<Vec<T>> {
    let pool = pool(workers)?;
    let threads = pool.current_num_threads() as u64;
    let chunk = n.div_ceil(threads * 4).max(1);
    let ranges: Vec<std::ops::Range<u64>> = (0..n).step_by(chunk as usize).map(|s| s..(s + chunk).min(n)).collect();
    pool.install(|| ranges.into_par_iter().map(&job).collect())
}

fn instantiate(agents: &[Agent; NUM_PLAYERS]) -> Vec<Box<dyn Policy + Send>> {
    agents.iter().map(Agent::instantiate).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub round: u8,
    pub seed: u64,
    pub rounds_per_position: u64,
    pub agents: Vec<String>,
    /// Seat 0 at bidding positions 0..4.
    pub positions: [Tally; NUM_PLAYERS],
    /// Every seat pooled over all positions.
    pub seats: [Tally; NUM_PLAYERS],
}

impl EvalReport {
    /// Seat 0 over all positions.
    pub fn overall(&self) -> Tally {
        let mut t = Tally::default();
        for p in &self.positions {
            t.merge(p);
        }
        t
    }

    pub fn accuracy(&self) -> f64 {
        self.overall().accuracy()
    }

    pub fn summary_json(&self) -> serde_json::Value {
        let tally = |t: &Tally| {
            serde_json::json!({
                "rounds": t.rounds, "hits": t.hits, "accuracy": t.accuracy(),
                "half_width_99": t.half_width(), "mean_points": t.mean_points(),
            })
        };
        serde_json::json!({
            "round": self.round,
            "seed": self.seed,
            "rounds_per_position": self.rounds_per_position,
            "agents": self.agents,
            "overall": tally(&self.overall()),
            "positions": self.positions.iter().map(tally).collect::<Vec<_>>(),
            "seats": self.seats.iter().map(tally).collect::<Vec<_>>(),
        })
    }
}

/// Plays `rounds_per_position` rounds with seat 0 at each bidding position;
/// DQN agents are greedy unless their spec sets an exploration rate.
pub fn eval_accuracy(
    agents: &[Agent; NUM_PLAYERS],
    names: &[String; NUM_PLAYERS],
    round: u8,
    rounds_per_position: u64,
    seed: u64,
    workers: usize,
) -> Result<EvalReport> {
    for a in agents {
        a.validate(round)?;
    }
    let n = rounds_per_position;
    let parts = parallel_chunks(n * NUM_PLAYERS as u64, workers, |range| {
        let mut seats = instantiate(agents);
        let mut positions = [Tally::default(); NUM_PLAYERS];
        let mut pooled = [Tally::default(); NUM_PLAYERS];
        for i in range {
            let position = (i / n) as usize;
            let mut rng = stream(seed, i);
            // Seat 0 bids at `position` when the first bidder sits `position` seats earlier.
            let first_bidder = (NUM_PLAYERS - position) % NUM_PLAYERS;
            let state = deal(&mut rng, round, first_bidder)?;
            let mut refs: Vec<&mut dyn Policy> = seats.iter_mut().map(|p| p.as_mut() as &mut dyn Policy).collect();
            let out = play_round(&mut refs, state, &mut rng, false)?;
            positions[position].record(out.hit(0), out.points[0]);
            for s in 0..NUM_PLAYERS {
                pooled[s].record(out.hit(s), out.points[s]);
            }
        }
        Ok((positions, pooled))
    })?;
    let mut report = EvalReport {
        round,
        seed,
        rounds_per_position: n,
        agents: names.to_vec(),
        positions: Default::default(),
        seats: Default::default(),
    };
    for (positions, pooled) in parts {
        for s in 0..NUM_PLAYERS {
            report.positions[s].merge(&positions[s]);
            report.seats[s].merge(&pooled[s]);
        }
    }
    Ok(report)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WinShareReport {
    pub max_round: u8,
    pub games: u64,
    pub seed: u64,
    pub agents: Vec<String>,
    /// Wins per seat in units of `1 / WIN_UNITS` game.
    pub wins: [u64; NUM_PLAYERS],
    pub total_points: [i64; NUM_PLAYERS],
}

impl WinShareReport {
    pub fn share(&self, seat: usize) -> f64 {
        self.wins[seat] as f64 / (WIN_UNITS * self.games) as f64
    }

    pub fn shares(&self) -> [f64; NUM_PLAYERS] {
        std::array::from_fn(|s| self.share(s))
    }

    pub fn mean_points(&self, seat: usize) -> f64 {
        self.total_points[seat] as f64 / self.games as f64
    }

    pub fn summary_json(&self) -> serde_json::Value {
        serde_json::json!({
            "max_round": self.max_round,
            "games": self.games,
            "seed": self.seed,
            "agents": self.agents,
            "shares": self.shares(),
            "mean_points": (0..NUM_PLAYERS).map(|s| self.mean_points(s)).collect::<Vec<_>>(),
        })
    }
}

/// Full games over rounds `1..=max_round`; the highest total wins and ties
/// split the game evenly.
pub fn eval_winning_share(
    agents: &[Agent; NUM_PLAYERS],
    names: &[String; NUM_PLAYERS],
    games: u64,
    max_round: u8,
    seed: u64,
    workers: usize,
) -> Result<WinShareReport> {
    if games == 0 {
        return Err(Error::Invalid("need at least one game".into()));
    }
    for r in 1..=max_round {
        for a in agents {
            a.validate(r)?;
        }
    }
    let parts = parallel_chunks(games, workers, |range| {
        let mut seats = instantiate(agents);
        let mut wins = [0u64; NUM_PLAYERS];
        let mut points = [0i64; NUM_PLAYERS];
        for g in range {
            let mut rng = stream(seed, g);
            let start = uniform_index(&mut rng, NUM_PLAYERS);
            let mut totals = [0i64; NUM_PLAYERS];
            for r in 1..=max_round {
                let state = deal(&mut rng, r, (start + r as usize - 1) % NUM_PLAYERS)?;
                let mut refs: Vec<&mut dyn Policy> = seats.iter_mut().map(|p| p.as_mut() as &mut dyn Policy).collect();
                let out = play_round(&mut refs, state, &mut rng, false)?;
                for s in 0..NUM_PLAYERS {
                    totals[s] += out.points[s] as i64;
                }
            }
            let best = *totals.iter().max().expect("four seats");
            let winners = totals.iter().filter(|&&t| t == best).count() as u64;
            for s in 0..NUM_PLAYERS {
                if totals[s] == best {
                    wins[s] += WIN_UNITS / winners;
                }
                points[s] += totals[s];
            }
        }
        Ok((wins, points))
    })?;
    let mut report =
        WinShareReport { max_round, games, seed, agents: names.to_vec(), wins: [0; 4], total_points: [0; 4] };
    for (wins, points) in parts {
        for s in 0..NUM_PLAYERS {
            report.wins[s] += wins[s];
            report.total_points[s] += points[s];
        }
    }
    Ok(report)
}

// ---------------------------------------------------------------------------
// CSV

pub const ACCURACY_HEADER: [&str; 12] = [
    "round",
    "seed",
    "rounds_per_position",
    "scope",
    "index",
    "agent",
    "rounds",
    "hits",
    "points",
    "accuracy",
    "half_width_99",
    "mean_points",
];

pub const SHARE_HEADER: [&str; 9] =
    ["max_round", "games", "seed", "seat", "agent", "wins_twelfths", "share", "total_points", "mean_points"];

fn finish(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| Error::Invalid(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn accuracy_csv(report: &EvalReport) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(ACCURACY_HEADER)?;
    let rows = report
        .positions
        .iter()
        .enumerate()
        .map(|(i, t)| ("position", i, &report.agents[0], t))
        .chain(report.seats.iter().enumerate().map(|(i, t)| ("seat", i, &report.agents[i], t)));
    for (scope, index, agent, t) in rows {
        w.write_record([
            report.round.to_string(),
            report.seed.to_string(),
            report.rounds_per_position.to_string(),
            scope.to_string(),
            index.to_string(),
            agent.clone(),
            t.rounds.to_string(),
            t.hits.to_string(),
            t.points.to_string(),
            t.accuracy().to_string(),
            t.half_width().to_string(),
            t.mean_points().to_string(),
        ])?;
    }
    finish(w)
}

fn field<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize) -> Result<T> {
    let raw = rec.get(i).ok_or_else(|| Error::Invalid(format!("missing column {}", ACCURACY_HEADER[i])))?;
    raw.parse().map_err(|_| Error::Invalid(format!("bad value `{raw}` in column {i}")))
}

pub fn parse_accuracy_csv(text: &str) -> Result<EvalReport> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    if r.headers()?.iter().ne(ACCURACY_HEADER) {
        return Err(Error::Invalid("not an accuracy report".into()));
    }
    let mut report: Option<EvalReport> = None;
    let mut seen = 0u8;
    for rec in r.records() {
        let rec = rec?;
        let rep = report.get_or_insert_with(|| EvalReport {
            round: 0,
            seed: 0,
            rounds_per_position: 0,
            agents: vec![String::new(); NUM_PLAYERS],
            positions: Default::default(),
            seats: Default::default(),
        });
        rep.round = field(&rec, 0)?;
        rep.seed = field(&rec, 1)?;
        rep.rounds_per_position = field(&rec, 2)?;
        let index: usize = field(&rec, 4)?;
        if index >= NUM_PLAYERS {
            return Err(Error::Invalid(format!("index {index}")));
        }
        let t = Tally { rounds: field(&rec, 6)?, hits: field(&rec, 7)?, points: field(&rec, 8)? };
        match &rec[3] {
            "position" => {
                rep.positions[index] = t;
                rep.agents[0] = rec[5].to_string();
                seen |= 1 << index;
            }
            "seat" => {
                rep.seats[index] = t;
                rep.agents[index] = rec[5].to_string();
                seen |= 1 << (4 + index);
            }
            other => return Err(Error::Invalid(format!("unknown scope `{other}`"))),
        }
    }
    match report {
        Some(rep) if seen == 0xff => Ok(rep),
        _ => Err(Error::Invalid("accuracy report is missing rows".into())),
    }
}

pub fn share_csv(report: &WinShareReport) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(SHARE_HEADER)?;
    for s in 0..NUM_PLAYERS {
        w.write_record([
            report.max_round.to_string(),
            report.games.to_string(),
            report.seed.to_string(),
            s.to_string(),
            report.agents[s].clone(),
            report.wins[s].to_string(),
            report.share(s).to_string(),
            report.total_points[s].to_string(),
            report.mean_points(s).to_string(),
        ])?;
    }
    finish(w)
}

pub fn parse_share_csv(text: &str) -> Result<WinShareReport> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    if r.headers()?.iter().ne(SHARE_HEADER) {
        return Err(Error::Invalid("not a winning-share report".into()));
    }
    let mut rep =
        WinShareReport { max_round: 0, games: 0, seed: 0, agents: vec![String::new(); 4], wins: [0; 4], total_points: [0; 4] };
    let mut seen = 0u8;
    for rec in r.records() {
        let rec = rec?;
        rep.max_round = field(&rec, 0)?;
        rep.games = field(&rec, 1)?;
        rep.seed = field(&rec, 2)?;
        let s: usize = field(&rec, 3)?;
        if s >= NUM_PLAYERS {
            return Err(Error::Invalid(format!("seat {s}")));
        }
        rep.agents[s] = rec[4].to_string();
        rep.wins[s] = field(&rec, 5)?;
        rep.total_points[s] = field(&rec, 7)?;
        seen |= 1 << s;
    }
    if seen != 0xf {
        return Err(Error::Invalid("winning-share report is missing seats".into()));
    }
    Ok(rep)
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    crate::nn::checkpoint::write_atomic(path, text.as_bytes())
}

// ---------------------------------------------------------------------------
// Plot data: one `x, series...` table per figure family.

/// Training curve: rounds against windowed accuracy per seat.
pub fn training_curve_plot(rows: &[ProgressRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["round_index", "seat0", "seat1", "seat2", "seat3", "mean", "epsilon"])?;
    for r in rows {
        let mut rec: Vec<String> = vec![r.round_index.to_string()];
        rec.extend(r.seats().iter().map(|v| v.to_string()));
        rec.push(r.window_accuracy.to_string());
        rec.push(r.epsilon.to_string());
        w.write_record(rec)?;
    }
    finish(w)
}

/// Round number against accuracy, with the random baseline `1 / (r + 1)`.
pub fn round_curve_plot(reports: &[EvalReport]) -> Result<String> {
    let mut sorted: Vec<&EvalReport> = reports.iter().collect();
    sorted.sort_by_key(|r| r.round);
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["round", "accuracy", "half_width_99", "random_baseline"])?;
    for r in sorted {
        let t = r.overall();
        w.write_record([
            r.round.to_string(),
            t.accuracy().to_string(),
            t.half_width().to_string(),
            (1.0 / (r.round as f64 + 1.0)).to_string(),
        ])?;
    }
    finish(w)
}

/// Bidding position (1-based) against accuracy.
pub fn position_curve_plot(report: &EvalReport) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["position", "accuracy", "half_width_99"])?;
    for (p, t) in report.positions.iter().enumerate() {
        w.write_record([(p + 1).to_string(), t.accuracy().to_string(), t.half_width().to_string()])?;
    }
    finish(w)
}

/// Seat against winning share.
pub fn share_bars_plot(report: &WinShareReport) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["seat", "agent", "share"])?;
    for s in 0..NUM_PLAYERS {
        w.write_record([s.to_string(), report.agents[s].clone(), report.share(s).to_string()])?;
    }
    finish(w)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(s: &str) -> [String; 4] {
        std::array::from_fn(|_| s.to_string())
    }

    #[test]
    fn random_accuracy_report_is_consistent() {
        let agents: [Agent; 4] = std::array::from_fn(|_| Agent::Random);
        let rep = eval_accuracy(&agents, &names("random"), 3, 2000, 11, 2).unwrap();
        assert_eq!(rep.overall().rounds, 8000);
        for t in &rep.seats {
            assert_eq!(t.rounds, 8000);
        }
        let p = 0.25;
        let sigma = (p * (1.0 - p) / 8000.0f64).sqrt();
        assert!((rep.accuracy() - p).abs() < 4.0 * sigma, "{}", rep.accuracy());
        let again = eval_accuracy(&agents, &names("random"), 3, 2000, 11, 1).unwrap();
        assert_eq!(rep, again, "worker count must not change the report");
    }

    #[test]
    fn accuracy_csv_round_trip() {
        let agents = [Agent::RuleBased, Agent::Random, Agent::Random, Agent::RuleBased];
        let n = ["rule", "random", "random", "rule"].map(String::from);
        let rep = eval_accuracy(&agents, &n, 2, 300, 3, 0).unwrap();
        let text = accuracy_csv(&rep).unwrap();
        assert!(text.starts_with(&ACCURACY_HEADER.join(",")));
        assert_eq!(parse_accuracy_csv(&text).unwrap(), rep);
        assert_eq!(text.lines().count(), 9);
        assert!(parse_accuracy_csv(&text.lines().take(5).collect::<Vec<_>>().join("\n")).is_err());
    }

    #[test]
    fn shares_sum_to_one_and_round_trip() {
        let agents: [Agent; 4] = std::array::from_fn(|_| Agent::Random);
        let rep = eval_winning_share(&agents, &names("random"), 400, 2, 5, 3).unwrap();
        assert_eq!(rep.wins.iter().sum::<u64>(), WIN_UNITS * 400);
        let again = eval_winning_share(&agents, &names("random"), 400, 2, 5, 1).unwrap();
        assert_eq!(rep, again);
        let text = share_csv(&rep).unwrap();
        assert_eq!(parse_share_csv(&text).unwrap(), rep);
        let plot = share_bars_plot(&rep).unwrap();
        assert_eq!(plot.lines().count(), 5);
    }

    #[test]
    fn half_width_matches_formula() {
        let t = Tally { rounds: 10_000, hits: 7_500, points: 0 };
        assert!((t.half_width() - Z99 * (0.75f64 * 0.25 / 10_000.0).sqrt()).abs() < 1e-15);
        assert_eq!(Tally::default().accuracy(), 0.0);
    }

    #[test]
    fn plot_tables_have_headers() {
        let agents: [Agent; 4] = std::array::from_fn(|_| Agent::Random);
        let reps: Vec<EvalReport> =
            [2u8, 1].iter().map(|&r| eval_accuracy(&agents, &names("random"), r, 50, 1, 1).unwrap()).collect();
        let fig3 = round_curve_plot(&reps).unwrap();
        let lines: Vec<&str> = fig3.lines().collect();
        assert_eq!(lines[0], "round,accuracy,half_width_99,random_baseline");
        assert!(lines[1].starts_with("1,") && lines[2].starts_with("2,"));
        assert_eq!(position_curve_plot(&reps[0]).unwrap().lines().count(), 5);
        assert_eq!(training_curve_plot(&[]).unwrap().lines().count(), 1);
    }
}
