//! Evaluation and champion selection: behavioural metrics, Pareto
//! filtering, round-robin tournaments over expected goal differences, and
//! maximum-entropy Nash averaging.
//!
//! The Nash solver works on the dual of the entropy program: for an
//! antisymmetric payoff A the maximum-entropy equilibrium solves
//! max H(p) s.t. A·p ≤ 0 over the simplex, whose dual is
//! min_{μ ≥ 0} log Σ exp((A·μ)) with primal recovery p = softmax(A·μ).
//! Projected gradient descent on the dual locates the support; an exact
//! nullspace solve on the support sub-game then pins the equilibrium to
//! machine precision. Exactly duplicated agents are merged before solving
//! and their mass split evenly afterwards, which keeps ratings invariant to
//! redundant copies.

use crate::curriculum::{CheckpointMeta, StageId};
use crate::error::{Error, Result};
use crate::net::Mlp;
use crate::pitch::{self, ActionCommand, PitchConfig, StepOutcome};
use crate::policy::{NetPolicy, Policy};
use crate::reward::{dense_reward, RewardContext, RewardParams};
use crate::rng::{stream, Domain};
use crate::vec2::Vec2;
use rand::Rng;
use std::fmt::Write as _;
use std::path::PathBuf;

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

/// Aggregated evaluation metrics for a subject (team 0 of the matches).
#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    pub success_rate: f64,
    pub mean_episode_length: f64,
    pub mean_vel_to_ball: f64,
    pub teammate_spread_out: f64,
    pub pass_rate: f64,
    pub interception_rate: f64,
    pub pass10_rate: f64,
    pub interception10_rate: f64,
}

impl MetricReport {
    pub fn csv_header() -> &'static str {
        "success_rate,mean_episode_length,mean_vel_to_ball,teammate_spread_out,\
         pass_rate,interception_rate,pass10_rate,interception10_rate"
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            self.success_rate,
            self.mean_episode_length,
            self.mean_vel_to_ball,
            self.teammate_spread_out,
            self.pass_rate,
            self.interception_rate,
            self.pass10_rate,
            self.interception10_rate
        )
    }
}

/// Full body poses and velocities at one control boundary.
#[derive(Debug, Clone)]
pub struct TraceSnapshot {
    pub ball_pos: Vec2,
    pub ball_vel: Vec2,
    pub agent_pos: Vec<Vec2>,
    pub agent_vel: Vec<Vec2>,
    pub agent_heading: Vec<f64>,
    pub agent_ang_vel: Vec<f64>,
}

impl TraceSnapshot {
    /// Snapshot with everything at rest; handy for building traces by hand.
    pub fn still(ball_pos: Vec2, agent_pos: Vec<Vec2>) -> Self {
        let n = agent_pos.len();
        Self {
            ball_pos,
            ball_vel: Vec2::default(),
            agent_vel: vec![Vec2::default(); n],
            agent_heading: vec![0.0; n],
            agent_ang_vel: vec![0.0; n],
            agent_pos,
        }
    }
}

/// Snapshot sequence of one episode, including the initial state.
#[derive(Debug, Clone)]
pub struct EpisodeTrace {
    pub teams: Vec<u8>,
    pub snapshots: Vec<TraceSnapshot>,
}

/// Per-episode behavioural numbers, split by team where applicable.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TraceMetrics {
    pub vel_to_ball: [f64; 2],
    pub spread_out: [f64; 2],
    pub passes: [u32; 2],
    pub interceptions: [u32; 2],
    pub passes_10m: [u32; 2],
    pub interceptions_10m: [u32; 2],
}

/// Scan one episode trace.
///
/// Definitions (thresholds in metres):
/// - vel-to-ball: agent velocity projected on the agent→ball unit vector,
///   averaged over snapshots and the team's agents;
/// - spread-out: fraction of snapshots with the team's two agents more than
///   `spread_threshold` apart (zero for 1-agent teams);
/// - touch: agent within `touch_threshold` of the ball; the toucher of a
///   snapshot is the closest such agent (ties to the lowest index). A touch
///   event occurs when the toucher differs from the previous event's agent.
///   Consecutive events by teammates count a pass for their team, by
///   opponents an interception for the later team; the `_10m` variants
///   additionally require the ball to have travelled at least
///   `travel_threshold` along its path between the two events.
pub fn trace_metrics(
    trace: &EpisodeTrace,
    touch_threshold: f64,
    spread_threshold: f64,
    travel_threshold: f64,
) -> TraceMetrics {
    let mut out = TraceMetrics::default();
    let n_agents = trace.teams.len();
    let n_snaps = trace.snapshots.len();
    if n_snaps == 0 {
        return out;
    }

    // vel-to-ball and spread-out are time averages.
    let mut vel_sums = [0.0f64; 2];
    let mut team_counts = [0usize; 2];
    for (agent, &team) in trace.teams.iter().enumerate() {
        team_counts[team as usize] += 1;
        let mut acc = 0.0;
        for snap in &trace.snapshots {
            let to_ball = (snap.ball_pos - snap.agent_pos[agent]).normalized();
            acc += snap.agent_vel[agent].dot(to_ball);
        }
        vel_sums[team as usize] += acc / n_snaps as f64;
    }
    for team in 0..2 {
        if team_counts[team] > 0 {
            out.vel_to_ball[team] = vel_sums[team] / team_counts[team] as f64;
        }
    }

    for team in 0..2u8 {
        let members: Vec<usize> =
            (0..n_agents).filter(|&a| trace.teams[a] == team).collect();
        if members.len() == 2 {
            let apart = trace
                .snapshots
                .iter()
                .filter(|s| {
                    (s.agent_pos[members[0]] - s.agent_pos[members[1]]).norm() > spread_threshold
                })
                .count();
            out.spread_out[team as usize] = apart as f64 / n_snaps as f64;
        }
    }

    // Touch-event detector, single pass.
    let mut last_event_agent: Option<usize> = None;
    let mut travel_since_event = 0.0;
    let mut prev_ball = trace.snapshots[0].ball_pos;
    for (si, snap) in trace.snapshots.iter().enumerate() {
        if si > 0 {
            travel_since_event += (snap.ball_pos - prev_ball).norm();
            prev_ball = snap.ball_pos;
        }
        let toucher = (0..n_agents)
            .map(|a| ((snap.agent_pos[a] - snap.ball_pos).norm(), a))
            .filter(|&(d, _)| d <= touch_threshold)
            .min_by(|x, y| x.partial_cmp(y).unwrap())
            .map(|(_, a)| a);
        if let Some(agent) = toucher {
            if last_event_agent != Some(agent) {
                if let Some(prev_agent) = last_event_agent {
                    let team = trace.teams[agent] as usize;
                    if trace.teams[prev_agent] == trace.teams[agent] {
                        out.passes[team] += 1;
                        if travel_since_event >= travel_threshold {
                            out.passes_10m[team] += 1;
                        }
                    } else {
                        out.interceptions[team] += 1;
                        if travel_since_event >= travel_threshold {
                            out.interceptions_10m[team] += 1;
                        }
                    }
                }
                last_event_agent = Some(agent);
                travel_since_event = 0.0;
            }
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Episode runner and evaluation
// ---------------------------------------------------------------------------

/// Everything recorded while playing one noise-free episode.
pub struct EpisodeRecord {
    pub outcome: StepOutcome,
    pub steps: u64,
    pub trace: EpisodeTrace,
    pub actions: Vec<Vec<ActionCommand>>,
    /// Dense per-agent rewards, logged for replay export.
    pub rewards: Vec<Vec<f64>>,
}

fn snapshot(state: &pitch::WorldState) -> TraceSnapshot {
    TraceSnapshot {
        ball_pos: state.ball.pos,
        ball_vel: state.ball.vel,
        agent_pos: state.agents.iter().map(|a| a.pos).collect(),
        agent_vel: state.agents.iter().map(|a| a.vel).collect(),
        agent_heading: state.agents.iter().map(|a| a.heading).collect(),
        agent_ang_vel: state.agents.iter().map(|a| a.angular_vel).collect(),
    }
}

/// Play a full sudden-death episode with one policy per agent.
pub fn play_episode(
    policies: &mut [&mut (dyn Policy + 'static)],
    stage: StageId,
    seed: u64,
    pitch_config: &PitchConfig,
    lambda: f64,
) -> Result<EpisodeRecord> {
    if policies.len() != stage.n_total() {
        return Err(Error::Contract(format!(
            "stage {stage} needs {} policies, got {}",
            stage.n_total(),
            policies.len()
        )));
    }
    let reward_params = RewardParams::with_lambda(pitch_config, lambda);
    let mut state = pitch::reset(pitch_config, stage, seed)?;
    let mut ctxs: Vec<RewardContext> =
        state.team_of.iter().map(|&t| RewardContext::at_reset(t)).collect();
    let teams = state.team_of.clone();
    let mut trace = EpisodeTrace { teams, snapshots: vec![snapshot(&state)] };
    let mut actions_log = Vec::new();
    let mut rewards_log = Vec::new();
    let mut steps = 0;

    loop {
        let mut actions = Vec::with_capacity(policies.len());
        for (agent, policy) in policies.iter_mut().enumerate() {
            actions.push(policy.act(&state, agent, pitch_config, lambda)?);
        }
        let (next, outcome) = pitch::step(&state, &actions, pitch_config, lambda)?;
        steps += 1;
        let (d, goal_d) = pitch::distances(&next, pitch_config);
        let mut rewards = Vec::with_capacity(policies.len());
        for (p, ctx) in ctxs.iter_mut().enumerate() {
            ctx.advance(d[p], goal_d, outcome.scored_team, lambda);
            rewards.push(dense_reward(ctx, &reward_params));
        }
        trace.snapshots.push(snapshot(&next));
        actions_log.push(actions);
        rewards_log.push(rewards);
        state = next;
        if outcome.terminal {
            return Ok(EpisodeRecord {
                outcome,
                steps,
                trace,
                actions: actions_log,
                rewards: rewards_log,
            });
        }
    }
}

/// Play `n_episodes` seeded episodes (team 0 = subject) and aggregate the
/// behavioural metrics. Success means team 0 scored before the timeout.
pub fn evaluate(
    team0: &mut [Box<dyn Policy>],
    team1: &mut [Box<dyn Policy>],
    stage: StageId,
    n_episodes: usize,
    seed: u64,
    pitch_config: &PitchConfig,
    lambda: f64,
) -> Result<MetricReport> {
    let mut episode_rng = stream(seed, Domain::Match, 0);
    let touch_threshold = lambda * pitch_config.diag();
    let mut successes = 0usize;
    let mut lengths = 0.0;
    let mut acc = TraceMetrics::default();
    let mut vel_acc = 0.0;
    let mut spread_acc = 0.0;

    for _ in 0..n_episodes {
        let ep_seed: u64 = episode_rng.gen();
        let mut refs: Vec<&mut dyn Policy> = Vec::new();
        for p in team0.iter_mut() {
            refs.push(p.as_mut());
        }
        for p in team1.iter_mut() {
            refs.push(p.as_mut());
        }
        let record = play_episode(&mut refs, stage, ep_seed, pitch_config, lambda)?;
        if record.outcome.scored_team == Some(0) {
            successes += 1;
        }
        lengths += record.steps as f64;
        let m = trace_metrics(&record.trace, touch_threshold, 5.0, 10.0);
        vel_acc += m.vel_to_ball[0];
        spread_acc += m.spread_out[0];
        acc.passes[0] += m.passes[0];
        acc.interceptions[0] += m.interceptions[0];
        acc.passes_10m[0] += m.passes_10m[0];
        acc.interceptions_10m[0] += m.interceptions_10m[0];
    }

    let n = n_episodes as f64;
    Ok(MetricReport {
        success_rate: successes as f64 / n,
        mean_episode_length: lengths / n,
        mean_vel_to_ball: vel_acc / n,
        teammate_spread_out: spread_acc / n,
        pass_rate: acc.passes[0] as f64 / n,
        interception_rate: acc.interceptions[0] as f64 / n,
        pass10_rate: acc.passes_10m[0] as f64 / n,
        interception10_rate: acc.interceptions_10m[0] as f64 / n,
    })
}

// ---------------------------------------------------------------------------
// Pareto filtering
// ---------------------------------------------------------------------------

/// Indices of the points not strictly dominated. A point dominates another
/// when it has strictly lower episode length AND strictly higher
/// vel-to-ball; ties never dominate.
pub fn pareto_front(points: &[(f64, f64)]) -> Vec<usize> {
    (0..points.len())
        .filter(|&i| {
            !points.iter().enumerate().any(|(j, &(len_j, vel_j))| {
                j != i && len_j < points[i].0 && vel_j > points[i].1
            })
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Payoff matrices and round robins
// ---------------------------------------------------------------------------

/// Antisymmetric matrix of expected goal differences.
#[derive(Debug, Clone, PartialEq)]
pub struct PayoffMatrix {
    n: usize,
    data: Vec<f64>,
}

impl PayoffMatrix {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![0.0; n * n] }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::Contract("payoff matrix must be square".into()));
        }
        let data = rows.iter().flatten().copied().collect();
        Ok(Self { n, data })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
    }

    /// Replace A by (A − Aᵀ)/2 and zero the diagonal.
    pub fn antisymmetrize(&mut self) {
        for i in 0..self.n {
            self.data[i * self.n + i] = 0.0;
            for j in (i + 1)..self.n {
                let v = (self.get(i, j) - self.get(j, i)) / 2.0;
                self.set(i, j, v);
                self.set(j, i, -v);
            }
        }
    }

    pub fn max_asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.n {
            for j in 0..self.n {
                worst = worst.max((self.get(i, j) + self.get(j, i)).abs());
            }
        }
        worst
    }

    /// A·p.
    pub fn ratings(&self, p: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self.get(i, j) * p[j]).sum())
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for i in 0..self.n {
            let row: Vec<String> = (0..self.n).map(|j| self.get(i, j).to_string()).collect();
            let _ = writeln!(out, "{}", row.join(","));
        }
        out
    }

    /// Duplicate agent `k` (row and column), for redundancy experiments.
    pub fn with_duplicated(&self, k: usize) -> PayoffMatrix {
        let n = self.n + 1;
        let mut m = PayoffMatrix::zeros(n);
        for i in 0..self.n {
            for j in 0..self.n {
                m.set(i, j, self.get(i, j));
            }
        }
        for i in 0..self.n {
            m.set(i, self.n, self.get(i, k));
            m.set(self.n, i, self.get(k, i));
        }
        m.set(self.n, self.n, 0.0);
        m
    }
}

/// Run a full round robin over `n` participants: `episodes_per_pair`
/// sudden-death episodes per unordered pair, `play(i, j, seed)` returning
/// the goal difference in favour of `i` (∈ {−1, 0, +1}). The result is
/// antisymmetrized with zero diagonal.
pub fn round_robin<F>(
    n: usize,
    episodes_per_pair: usize,
    seed: u64,
    mut play: F,
) -> Result<PayoffMatrix>
where
    F: FnMut(usize, usize, u64) -> Result<i32>,
{
    if n < 2 {
        return Err(Error::Contract("round robin needs at least two participants".into()));
    }
    let mut payoff = PayoffMatrix::zeros(n);
    for i in 0..n {
        for j in (i + 1)..n {
            let mut match_rng = stream(seed, Domain::Match, (i * n + j) as u64);
            let mut total = 0i64;
            for _ in 0..episodes_per_pair {
                let gd = play(i, j, match_rng.gen())?;
                debug_assert!((-1..=1).contains(&gd));
                total += gd as i64;
            }
            let mean = total as f64 / episodes_per_pair as f64;
            payoff.set(i, j, mean);
            payoff.set(j, i, -mean);
        }
    }
    payoff.antisymmetrize();
    Ok(payoff)
}

/// One sudden-death match between two actor teams in the given format;
/// returns the goal difference for `team_a`.
pub fn play_match(
    team_a: &[Mlp],
    team_b: &[Mlp],
    format: StageId,
    seed: u64,
    pitch_config: &PitchConfig,
    lambda: f64,
) -> Result<i32> {
    let per_side = format.n_total() / 2;
    if format == StageId::S1_1v0 || team_a.len() != per_side || team_b.len() != per_side {
        return Err(Error::Contract(format!(
            "format {format} needs {per_side} actors per side"
        )));
    }
    let mut policies: Vec<Box<dyn Policy>> = Vec::with_capacity(format.n_total());
    for (slot, actor) in team_a.iter().chain(team_b.iter()).enumerate() {
        let policy = net_policy_for_slot(actor.clone(), slot, format)?;
        policies.push(Box::new(policy));
    }
    let mut refs: Vec<&mut dyn Policy> = policies.iter_mut().map(|p| p.as_mut()).collect();
    let record = play_episode(&mut refs, format, seed, pitch_config, lambda)?;
    Ok(match record.outcome.scored_team {
        Some(0) => 1,
        Some(_) => -1,
        None => 0,
    })
}

/// Wire an actor into a match slot according to its native observation
/// layout: 18-dim policies observe nobody, 24-dim policies observe one
/// fixed adversary (slot k observes opposing slot k), full-stage policies
/// observe everyone in canonical order.
pub fn net_policy_for_slot(actor: Mlp, slot: usize, format: StageId) -> Result<NetPolicy> {
    let native = actor.arch().stage;
    let per_side = format.n_total() / 2;
    let others: Vec<usize> = match native {
        StageId::S1_1v0 => vec![],
        StageId::S2_1v1 => {
            // Fixed single adversary for the whole match.
            let adversary = if slot < per_side { per_side + slot } else { slot - per_side };
            if adversary >= format.n_total() {
                return Err(Error::Contract("slot out of range for format".into()));
            }
            vec![adversary]
        }
        StageId::S3_2v2 => {
            if format != StageId::S3_2v2 {
                return Err(Error::Contract("2v2 policies only fit the 2v2 format".into()));
            }
            let team: Vec<usize> = if slot < per_side { (0..per_side).collect() } else { (per_side..2 * per_side).collect() };
            let mut others: Vec<usize> =
                team.iter().copied().filter(|&a| a != slot).collect();
            let opponents: Vec<usize> = if slot < per_side {
                (per_side..2 * per_side).collect()
            } else {
                (0..per_side).collect()
            };
            others.extend(opponents);
            others
        }
    };
    Ok(NetPolicy::new(actor, others))
}

// ---------------------------------------------------------------------------
// Maximum-entropy Nash averaging
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct NashResult {
    pub p_star: Vec<f64>,
    pub ratings: Vec<f64>,
    pub iterations: u64,
    /// max over entries of A·p at solver scale.
    pub residual: f64,
}

pub fn entropy(p: &[f64]) -> f64 {
    -p.iter().filter(|&&x| x > 0.0).map(|&x| x * x.ln()).sum::<f64>()
}

fn softmax(z: &[f64]) -> Vec<f64> {
    let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = z.iter().map(|&v| (v - m).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

fn mat_vec(a: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
    a.iter().map(|row| row.iter().zip(x).map(|(&r, &v)| r * v).sum()).collect()
}

/// Nullspace basis of a square matrix by Gauss-Jordan elimination with
/// partial pivoting; `tol` is the pivot threshold relative to the largest
/// entry.
fn nullspace(matrix: &[Vec<f64>], tol: f64) -> Vec<Vec<f64>> {
    let k = matrix.len();
    let mut m: Vec<Vec<f64>> = matrix.to_vec();
    let scale = m
        .iter()
        .flat_map(|r| r.iter())
        .fold(0.0f64, |acc, &v| acc.max(v.abs()))
        .max(1e-300);
    let threshold = tol * scale;

    let mut pivot_col_of_row = vec![usize::MAX; k];
    let mut row = 0;
    for col in 0..k {
        // Partial pivot.
        let (best_row, best_val) = (row..k)
            .map(|r| (r, m[r][col].abs()))
            .fold((row, 0.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        if best_val <= threshold {
            continue;
        }
        m.swap(row, best_row);
        let pivot = m[row][col];
        for c in 0..k {
            m[row][c] /= pivot;
        }
        for r in 0..k {
            if r != row && m[r][col] != 0.0 {
                let factor = m[r][col];
                for c in 0..k {
                    m[r][c] -= factor * m[row][c];
                }
            }
        }
        pivot_col_of_row[row] = col;
        row += 1;
        if row == k {
            break;
        }
    }

    let pivot_cols: Vec<usize> = pivot_col_of_row[..row].to_vec();
    let free_cols: Vec<usize> = (0..k).filter(|c| !pivot_cols.contains(c)).collect();
    free_cols
        .iter()
        .map(|&fc| {
            let mut v = vec![0.0; k];
            v[fc] = 1.0;
            for (r, &pc) in pivot_cols.iter().enumerate() {
                v[pc] = -m[r][fc];
            }
            v
        })
        .collect()
}

/// Group agents that are exact duplicates (identical rows and columns).
/// Returns (representative matrix, group membership per original index,
/// group sizes).
fn merge_duplicates(a: &PayoffMatrix) -> (Vec<Vec<f64>>, Vec<usize>, Vec<usize>) {
    let n = a.n();
    let mut group_of = vec![usize::MAX; n];
    let mut reps: Vec<usize> = Vec::new();
    for i in 0..n {
        let mut assigned = false;
        for (g, &rep) in reps.iter().enumerate() {
            let same = (0..n).all(|k| {
                (k == i || k == rep || a.get(i, k) == a.get(rep, k))
                    && (k == i || k == rep || a.get(k, i) == a.get(k, rep))
            }) && a.get(i, rep) == 0.0
                && a.get(rep, i) == 0.0;
            if same {
                group_of[i] = g;
                assigned = true;
                break;
            }
        }
        if !assigned {
            group_of[i] = reps.len();
            reps.push(i);
        }
    }
    let m = reps.len();
    let mut reduced = vec![vec![0.0; m]; m];
    for (gi, &ri) in reps.iter().enumerate() {
        for (gj, &rj) in reps.iter().enumerate() {
            reduced[gi][gj] = a.get(ri, rj);
        }
    }
    let mut sizes = vec![0usize; m];
    for &g in &group_of {
        sizes[g] += 1;
    }
    (reduced, group_of, sizes)
}

/// Maximum-entropy Nash equilibrium of the symmetric zero-sum game given by
/// an antisymmetric payoff matrix: p ≥ 0, Σp = 1, with certificate
/// max(A·p) ≤ tol at solver scale (payoffs normalized to unit max-entry).
/// Ratings are A·p at the original scale.
pub fn maxent_nash(a: &PayoffMatrix, tol: f64) -> Result<NashResult> {
    maxent_nash_with_budget(a, tol, 400_000)
}

pub fn maxent_nash_with_budget(a: &PayoffMatrix, tol: f64, max_iters: u64) -> Result<NashResult> {
    let n = a.n();
    if n == 0 {
        return Err(Error::Contract("empty payoff matrix".into()));
    }
    if a.max_asymmetry() > 1e-9 * (1.0 + a.data.iter().fold(0.0f64, |m, v| m.max(v.abs()))) {
        return Err(Error::Contract("payoff matrix is not antisymmetric".into()));
    }

    let scale = a.data.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
    let (mut reduced, group_of, sizes) = merge_duplicates(a);
    let m = reduced.len();
    if scale > 0.0 {
        for row in &mut reduced {
            for v in row.iter_mut() {
                *v /= scale;
            }
        }
    }

    // Solve the reduced game.
    let (p_reduced, iterations, residual) = if m == 1 {
        (vec![1.0], 0, 0.0)
    } else {
        solve_reduced(&reduced, tol, max_iters)?
    };

    // Split merged mass evenly across duplicates (the maximum-entropy split).
    let mut p_full = vec![0.0; n];
    for (i, &g) in group_of.iter().enumerate() {
        p_full[i] = p_reduced[g] / sizes[g] as f64;
    }
    let ratings = a.ratings(&p_full);
    Ok(NashResult { p_star: p_full, ratings, iterations, residual })
}

/// Dual projected-gradient phase plus exact support snap on a unit-scale
/// antisymmetric matrix without duplicate agents.
fn solve_reduced(w: &[Vec<f64>], tol: f64, max_iters: u64) -> Result<(Vec<f64>, u64, f64)> {
    let m = w.len();
    if max_iters == 0 {
        return Err(Error::Solver(format!(
            "no equilibrium certificate within 0 iterations (best residual inf > tol {tol:.1e})"
        )));
    }
    let lipschitz: f64 = w.iter().flat_map(|r| r.iter()).map(|v| v * v).sum::<f64>().max(1e-12);
    let mut candidates: Vec<(Vec<f64>, f64, u64)> = Vec::new(); // (p, residual, iters)
    let mut best_residual = f64::INFINITY;
    let mut total_iters = 0u64;

    let inits: Vec<Vec<f64>> = vec![
        vec![0.0; m],
        vec![0.05; m],
        {
            let mut rng = stream(0x6e61_7368, Domain::Match, m as u64);
            (0..m).map(|_| rng.gen_range(0.0..0.2)).collect()
        },
    ];
    let budget_per_start = (max_iters / inits.len() as u64).max(1);

    for mu0 in inits {
        let mut mu = mu0;
        let mut eta = 1.0 / lipschitz;
        let mut p = softmax(&mat_vec(w, &mu));
        let mut g_cur = log_sum_exp(&mat_vec(w, &mu));

        // A verified snap whose support excludes dual mass may be a
        // lower-entropy equilibrium of a degenerate game; in that case the
        // dual keeps running for a bounded grace window so the
        // maximum-entropy point can still certify itself.
        let mut grace_deadline: Option<u64> = None;
        for iter_in_start in 0..budget_per_start {
            total_iters += 1;
            let wp = mat_vec(w, &p);
            let residual = wp.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            if residual < best_residual {
                best_residual = residual;
            }
            if residual <= tol {
                candidates.push((p.clone(), residual, total_iters));
                break;
            }
            if grace_deadline.map(|d| iter_in_start >= d).unwrap_or(false) {
                break;
            }
            if total_iters % 16 == 0 {
                if let Some((snap, snap_res)) = try_snap(w, &p, tol) {
                    let agrees = p
                        .iter()
                        .zip(&snap)
                        .all(|(a, b)| (a - b).abs() < 0.05);
                    candidates.push((snap, snap_res, total_iters));
                    if agrees {
                        break;
                    }
                    grace_deadline.get_or_insert(iter_in_start + 2000);
                }
            }

            // Projected gradient step on the dual (∇g(μ) = −W·p) with a
            // monotone line search; the step regrows every iteration so
            // the ray toward unbounded dual optima is traversed
            // geometrically.
            eta = (eta * 2.0).min(1e12);
            let mut proposal = vec![0.0; m];
            let mut accepted = false;
            for _ in 0..80 {
                for k in 0..m {
                    proposal[k] = (mu[k] + eta * wp[k]).max(0.0);
                }
                if proposal == mu {
                    break;
                }
                let g_new = log_sum_exp(&mat_vec(w, &proposal));
                if g_new <= g_cur {
                    accepted = true;
                    g_cur = g_new;
                    break;
                }
                eta *= 0.5;
            }
            if !accepted {
                break;
            }
            mu = proposal;
            p = softmax(&mat_vec(w, &mu));
        }

        if let Some((snap, snap_res)) = try_snap(w, &p, tol) {
            candidates.push((snap, snap_res, total_iters));
        } else {
            let wp = mat_vec(w, &p);
            let residual = wp.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            if residual <= tol {
                candidates.push((p.clone(), residual, total_iters));
            }
        }
    }

    if candidates.is_empty() {
        return Err(Error::Solver(format!(
            "no equilibrium certificate within {max_iters} iterations \
             (best residual {best_residual:.3e} > tol {tol:.1e})"
        )));
    }
    // Maximum entropy among certified candidates; first on ties.
    let best = candidates
        .iter()
        .max_by(|a, b| entropy(&a.0).partial_cmp(&entropy(&b.0)).unwrap())
        .unwrap();
    Ok((best.0.clone(), best.2, best.1))
}

fn log_sum_exp(z: &[f64]) -> f64 {
    let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    m + z.iter().map(|&v| (v - m).exp()).sum::<f64>().ln()
}

/// Attempt to read the support off a dual iterate and solve the support
/// sub-game exactly: A_SS x = 0 with Σx = 1 and x > 0. Candidate supports
/// are the prefixes of the agents ranked by dual mass (generic
/// antisymmetric games have a unique odd-support equilibrium, so the
/// nullspace is one-dimensional exactly at the right prefix). Returns the
/// zero-padded solution and its certificate residual when it verifies.
fn try_snap(w: &[Vec<f64>], p: &[f64], tol: f64) -> Option<(Vec<f64>, f64)> {
    let m = w.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| p[b].partial_cmp(&p[a]).unwrap().then(a.cmp(&b)));
    for k in 1..=m {
        let mut support: Vec<usize> = order[..k].to_vec();
        support.sort_unstable();
        let sub: Vec<Vec<f64>> = support
            .iter()
            .map(|&i| support.iter().map(|&j| w[i][j]).collect())
            .collect();
        let basis = nullspace(&sub, 1e-10);
        if basis.len() != 1 {
            continue;
        }
        let mut x = basis[0].clone();
        let sum: f64 = x.iter().sum();
        if sum.abs() < 1e-12 {
            continue;
        }
        for v in x.iter_mut() {
            *v /= sum;
        }
        if x.iter().any(|&v| v < -1e-12) {
            continue;
        }
        let mut full = vec![0.0; m];
        for (idx, &i) in support.iter().enumerate() {
            full[i] = x[idx].max(0.0);
        }
        let total: f64 = full.iter().sum();
        for v in full.iter_mut() {
            *v /= total;
        }
        let r = mat_vec(w, &full);
        let max_r = r.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let support_err = support.iter().map(|&i| r[i].abs()).fold(0.0f64, f64::max);
        if max_r <= tol && support_err <= tol {
            let residual = max_r.max(support_err);
            return Some((full, residual));
        }
    }
    None
}

// ---------------------------------------------------------------------------
// Champion selection
// ---------------------------------------------------------------------------

/// One checkpoint loaded into a selection pool.
pub struct PoolEntry {
    pub path: PathBuf,
    pub meta: CheckpointMeta,
    pub actors: Vec<Mlp>,
}

pub struct SelectionConfig {
    /// Episodes per entry for the task evaluation.
    pub n_episodes: usize,
    /// Episodes per pairing in the round robin.
    pub episodes_per_pair: usize,
    pub seed: u64,
    /// When the stage filter empties the pool, keep the best tier instead
    /// of failing.
    pub relax_filter: bool,
    /// Frozen opposition for the task evaluation (empty for 1v0 pools, the
    /// stage-1 champion for 1v1 pools, the stage-2 champion team for 2v2).
    pub task_opposition: Vec<Mlp>,
    pub lambda: f64,
    pub nash_tol: f64,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        Self {
            n_episodes: 100,
            episodes_per_pair: 10,
            seed: 0,
            relax_filter: false,
            task_opposition: Vec::new(),
            lambda: 0.03,
            nash_tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone)]
pub struct EntryEval {
    pub success_rate: f64,
    pub mean_episode_length: f64,
    pub mean_vel_to_ball: f64,
}

pub struct SelectionReport {
    /// Task evaluation per pool entry.
    pub entries: Vec<EntryEval>,
    pub filter_threshold: f64,
    /// Pool indices surviving the success filter.
    pub filtered: Vec<usize>,
    /// Pool indices on the Pareto front (subset of `filtered`).
    pub pareto: Vec<usize>,
    /// Round-robin participants: teams as lists of pool indices.
    pub participants: Vec<Vec<usize>>,
    pub payoff: PayoffMatrix,
    pub nash: NashResult,
    /// Pool indices of the champion entry/team members.
    pub champion: Vec<usize>,
    pub champion_paths: Vec<PathBuf>,
    /// Checkpoints that failed to load (path, reason); filled by callers.
    pub skipped: Vec<(PathBuf, String)>,
}

/// Full selection procedure for a checkpoint pool of the given stage:
/// task-success filter (100% for 1v0 pools, the 95th percentile for later
/// stages), Pareto filter on (episode length, vel-to-ball), round robin in
/// the next stage's format, then maximum-entropy Nash averaging; champion
/// is the highest Nash rating with ties broken toward the lowest index.
pub fn select_champion(
    pool: Vec<PoolEntry>,
    stage: StageId,
    pitch_config: &PitchConfig,
    config: &SelectionConfig,
) -> Result<SelectionReport> {
    if pool.is_empty() {
        return Err(Error::Selection("empty pool".into()));
    }
    let lambda = config.lambda;

    // Task evaluation.
    let mut entries = Vec::with_capacity(pool.len());
    for (idx, entry) in pool.iter().enumerate() {
        let report = evaluate_entry(entry, stage, pitch_config, config, idx as u64)?;
        entries.push(EntryEval {
            success_rate: report.success_rate,
            mean_episode_length: report.mean_episode_length,
            mean_vel_to_ball: report.mean_vel_to_ball,
        });
    }

    // Stage success filter.
    let successes: Vec<f64> = entries.iter().map(|e| e.success_rate).collect();
    let filter_threshold = match stage {
        StageId::S1_1v0 => 1.0,
        _ => percentile(&successes, 0.95),
    };
    let mut filtered: Vec<usize> =
        (0..pool.len()).filter(|&i| successes[i] >= filter_threshold).collect();
    if filtered.is_empty() {
        if config.relax_filter {
            let best = successes.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            filtered = (0..pool.len()).filter(|&i| successes[i] == best).collect();
        } else {
            return Err(Error::Selection(format!(
                "no pool entry meets the stage {stage} success filter ({filter_threshold}); \
                 re-run with the relax-filter flag to keep the best tier"
            )));
        }
    }

    // Pareto front over (mean episode length, vel-to-ball).
    let points: Vec<(f64, f64)> = filtered
        .iter()
        .map(|&i| (entries[i].mean_episode_length, entries[i].mean_vel_to_ball))
        .collect();
    let pareto: Vec<usize> = pareto_front(&points).into_iter().map(|k| filtered[k]).collect();

    // Participants of the next-format round robin.
    let participants: Vec<Vec<usize>> = match stage {
        StageId::S1_1v0 => pareto.iter().map(|&i| vec![i]).collect(),
        StageId::S2_1v1 => {
            // All two-agent teams from the survivors, self-pairs included.
            let mut teams = Vec::new();
            for (a, &i) in pareto.iter().enumerate() {
                for &j in pareto.iter().skip(a) {
                    teams.push(vec![i, j]);
                }
            }
            teams
        }
        StageId::S3_2v2 => pareto.iter().map(|&i| vec![i]).collect(),
    };

    let (payoff, nash, champion) = if participants.len() == 1 {
        // Trivial pool: the lone participant is the champion.
        let payoff = PayoffMatrix::zeros(1);
        let nash = NashResult { p_star: vec![1.0], ratings: vec![0.0], iterations: 0, residual: 0.0 };
        (payoff, nash, participants[0].clone())
    } else {
        let format = match stage {
            StageId::S1_1v0 => StageId::S2_1v1,
            StageId::S2_1v1 | StageId::S3_2v2 => StageId::S3_2v2,
        };
        let actors_of = |team: &Vec<usize>| -> Vec<Mlp> {
            match stage {
                StageId::S1_1v0 | StageId::S2_1v1 => {
                    team.iter().map(|&i| pool[i].actors[0].clone()).collect()
                }
                StageId::S3_2v2 => pool[team[0]].actors.clone(),
            }
        };
        let payoff = round_robin(participants.len(), config.episodes_per_pair, config.seed, |i, j, seed| {
            play_match(
                &actors_of(&participants[i]),
                &actors_of(&participants[j]),
                format,
                seed,
                pitch_config,
                lambda,
            )
        })?;
        let nash = maxent_nash(&payoff, config.nash_tol)?;
        let mut champ = 0;
        for (k, &r) in nash.ratings.iter().enumerate() {
            if r > nash.ratings[champ] {
                champ = k;
            }
        }
        (payoff, nash, participants[champ].clone())
    };

    let champion_paths = champion.iter().map(|&i| pool[i].path.clone()).collect();
    Ok(SelectionReport {
        entries,
        filter_threshold,
        filtered,
        pareto,
        participants,
        payoff,
        nash,
        champion,
        champion_paths,
        skipped: Vec::new(),
    })
}

fn evaluate_entry(
    entry: &PoolEntry,
    stage: StageId,
    pitch_config: &PitchConfig,
    config: &SelectionConfig,
    salt: u64,
) -> Result<MetricReport> {
    let lambda = config.lambda;
    let mut team0: Vec<Box<dyn Policy>> = Vec::new();
    let mut team1: Vec<Box<dyn Policy>> = Vec::new();
    match stage {
        StageId::S1_1v0 => {
            team0.push(Box::new(NetPolicy::new(entry.actors[0].clone(), vec![])));
        }
        StageId::S2_1v1 => {
            if config.task_opposition.len() != 1 {
                return Err(Error::MissingArtifact(
                    "1v1 pool evaluation needs the stage-1 champion as opposition".into(),
                ));
            }
            team0.push(Box::new(NetPolicy::new(entry.actors[0].clone(), vec![1])));
            team1.push(Box::new(net_policy_for_slot(
                config.task_opposition[0].clone(),
                1,
                StageId::S2_1v1,
            )?));
        }
        StageId::S3_2v2 => {
            if config.task_opposition.len() != 2 {
                return Err(Error::MissingArtifact(
                    "2v2 pool evaluation needs the stage-2 champion team as opposition".into(),
                ));
            }
            if entry.actors.len() != 2 {
                return Err(Error::Contract("2v2 pool entries must hold two actors".into()));
            }
            for (slot, actor) in entry.actors.iter().enumerate() {
                team0.push(Box::new(net_policy_for_slot(actor.clone(), slot, StageId::S3_2v2)?));
            }
            for (k, actor) in config.task_opposition.iter().enumerate() {
                team1.push(Box::new(net_policy_for_slot(actor.clone(), 2 + k, StageId::S3_2v2)?));
            }
        }
    }
    evaluate(
        &mut team0,
        &mut team1,
        match stage {
            StageId::S1_1v0 => StageId::S1_1v0,
            StageId::S2_1v1 => StageId::S2_1v1,
            StageId::S3_2v2 => StageId::S3_2v2,
        },
        config.n_episodes,
        config.seed ^ salt.wrapping_mul(0x9e37_79b9_7f4a_7c15),
        pitch_config,
        lambda,
    )
}

/// Nearest-rank percentile (q ∈ [0, 1]) of a non-empty slice.
fn percentile(values: &[f64], q: f64) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let rank = ((q * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    sorted[rank - 1]
}

/// Number of two-agent teams formable from `k` agents, self-pairs included.
pub fn team_count(k: usize) -> usize {
    k * (k - 1) / 2 + k
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::{ChaserPolicy, RandomPolicy, ZeroPolicy};
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const LAMBDA: f64 = 0.03;

    // -- metrics --------------------------------------------------------

    fn still_trace(teams: Vec<u8>, agent_pos: Vec<Vec2>, n_steps: usize) -> EpisodeTrace {
        let snap = TraceSnapshot::still(Vec2::new(0.0, 0.0), agent_pos);
        EpisodeTrace { teams, snapshots: vec![snap; n_steps] }
    }

    #[test]
    fn stationary_agents_have_zero_vel_to_ball() {
        let trace = still_trace(vec![0], vec![Vec2::new(5.0, 0.0)], 50);
        let m = trace_metrics(&trace, 1.5, 5.0, 10.0);
        assert_eq!(m.vel_to_ball[0], 0.0);
    }

    #[test]
    fn pinned_teammates_six_meters_apart_spread_out_full_episode() {
        let trace = still_trace(
            vec![0, 0],
            vec![Vec2::new(-3.0, 3.0), Vec2::new(3.0, 3.0)],
            40,
        );
        let m = trace_metrics(&trace, 1.5, 5.0, 10.0);
        assert_eq!(m.spread_out[0], 1.0);
        // 4 m apart: never spread out.
        let trace = still_trace(
            vec![0, 0],
            vec![Vec2::new(-2.0, 3.0), Vec2::new(2.0, 3.0)],
            40,
        );
        assert_eq!(trace_metrics(&trace, 1.5, 5.0, 10.0).spread_out[0], 0.0);
    }

    /// Hand-built trace: A touches, ball travels 12 m, teammate B touches.
    #[test]
    fn crafted_pass_with_long_travel_counts_pass_and_pass10() {
        let teams = vec![0, 0, 1, 1];
        let far = Vec2::new(50.0, 50.0);
        let mut snapshots = Vec::new();
        // Step 0: agent 0 at the ball.
        snapshots.push(TraceSnapshot::still(
            Vec2::new(0.0, 0.0),
            vec![Vec2::new(0.5, 0.0), Vec2::new(12.5, 0.0), far, far],
        ));
        // Ball rolls 12 m in 1 m hops; nobody touches in between.
        for k in 1..=12 {
            snapshots.push(TraceSnapshot::still(
                Vec2::new(k as f64, 0.0),
                vec![Vec2::new(-5.0, 5.0), Vec2::new(12.5, 0.0), far, far],
            ));
        }
        let trace = EpisodeTrace { teams, snapshots };
        let m = trace_metrics(&trace, 1.5, 5.0, 10.0);
        assert_eq!(m.passes[0], 1);
        assert_eq!(m.passes_10m[0], 1);
        assert_eq!(m.interceptions, [0, 0]);
    }

    #[test]
    fn interception_credits_the_stealing_team() {
        let teams = vec![0, 0, 1, 1];
        let far = Vec2::new(50.0, 50.0);
        let snapshots = vec![
            TraceSnapshot::still(
                Vec2::new(0.0, 0.0),
                vec![Vec2::new(0.5, 0.0), far, Vec2::new(4.0, 0.0), far],
            ),
            TraceSnapshot::still(
                Vec2::new(4.0, 0.0),
                vec![Vec2::new(0.5, 0.0), far, Vec2::new(4.3, 0.0), far],
            ),
        ];
        let trace = EpisodeTrace { teams, snapshots };
        let m = trace_metrics(&trace, 1.5, 5.0, 10.0);
        assert_eq!(m.interceptions[1], 1);
        assert_eq!(m.interceptions_10m[1], 0, "ball travelled only 4 m");
        assert_eq!(m.passes, [0, 0]);
    }

    /// Independent brute-force scanner used to cross-check the incremental
    /// detector on randomized traces.
    pub(super) fn brute_force_metrics(
        trace: &EpisodeTrace,
        touch_threshold: f64,
        travel_threshold: f64,
    ) -> ([u32; 2], [u32; 2], [u32; 2], [u32; 2]) {
        let n = trace.teams.len();
        // Full toucher table.
        let touchers: Vec<Option<usize>> = trace
            .snapshots
            .iter()
            .map(|s| {
                let mut best: Option<(f64, usize)> = None;
                for a in 0..n {
                    let d = (s.agent_pos[a] - s.ball_pos).norm();
                    if d <= touch_threshold && best.map(|(bd, _)| d < bd).unwrap_or(true) {
                        best = Some((d, a));
                    }
                }
                best.map(|(_, a)| a)
            })
            .collect();
        // Event list with snapshot indices.
        let mut events: Vec<(usize, usize)> = Vec::new();
        for (t, &tt) in touchers.iter().enumerate() {
            if let Some(agent) = tt {
                if events.last().map(|&(_, a)| a != agent).unwrap_or(true) {
                    events.push((t, agent));
                }
            }
        }
        let travel = |from: usize, to: usize| -> f64 {
            (from..to)
                .map(|t| (trace.snapshots[t + 1].ball_pos - trace.snapshots[t].ball_pos).norm())
                .sum()
        };
        let mut passes = [0u32; 2];
        let mut passes10 = [0u32; 2];
        let mut intercepts = [0u32; 2];
        let mut intercepts10 = [0u32; 2];
        for pair in events.windows(2) {
            let (t0, a) = pair[0];
            let (t1, b) = pair[1];
            let dist = travel(t0, t1);
            let team_b = trace.teams[b] as usize;
            if trace.teams[a] == trace.teams[b] {
                passes[team_b] += 1;
                if dist >= travel_threshold {
                    passes10[team_b] += 1;
                }
            } else {
                intercepts[team_b] += 1;
                if dist >= travel_threshold {
                    intercepts10[team_b] += 1;
                }
            }
        }
        (passes, intercepts, passes10, intercepts10)
    }

    pub(super) fn synthetic_trace(seed: u64) -> EpisodeTrace {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let teams = vec![0u8, 0, 1, 1];
        let mut agent_pos: Vec<Vec2> =
            (0..4).map(|_| Vec2::new(rng.gen_range(-20.0..20.0), rng.gen_range(-15.0..15.0))).collect();
        let mut ball = Vec2::new(rng.gen_range(-20.0..20.0), rng.gen_range(-15.0..15.0));
        let steps = rng.gen_range(30..120);
        let mut snapshots = Vec::with_capacity(steps);
        for _ in 0..steps {
            for p in agent_pos.iter_mut() {
                *p += Vec2::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            }
            ball += Vec2::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
            // Occasionally teleport the ball next to a random agent to force
            // touch events.
            if rng.gen_bool(0.25) {
                let a = rng.gen_range(0..4);
                ball = agent_pos[a] + Vec2::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            }
            let mut snap = TraceSnapshot::still(ball, agent_pos.clone());
            snap.agent_vel = (0..4)
                .map(|_| Vec2::new(rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0)))
                .collect();
            snapshots.push(snap);
        }
        EpisodeTrace { teams, snapshots }
    }

    #[test]
    fn detector_agrees_with_brute_force_on_random_traces() {
        let mut with_events = 0;
        for seed in 0..200 {
            let trace = synthetic_trace(seed);
            let m = trace_metrics(&trace, 1.5, 5.0, 10.0);
            let (p, i, p10, i10) = brute_force_metrics(&trace, 1.5, 10.0);
            assert_eq!(m.passes, p, "seed {seed}");
            assert_eq!(m.interceptions, i, "seed {seed}");
            assert_eq!(m.passes_10m, p10, "seed {seed}");
            assert_eq!(m.interceptions_10m, i10, "seed {seed}");
            if p[0] + p[1] + i[0] + i[1] > 0 {
                with_events += 1;
            }
        }
        assert!(with_events > 100, "generator should produce touch-rich traces");
    }

    // -- evaluation -----------------------------------------------------

    #[test]
    fn chaser_has_perfect_success_on_empty_field() {
        let pitch = PitchConfig::default();
        let mut team0: Vec<Box<dyn Policy>> = vec![Box::new(ChaserPolicy::new())];
        let mut team1: Vec<Box<dyn Policy>> = vec![];
        let report =
            evaluate(&mut team0, &mut team1, StageId::S1_1v0, 40, 3, &pitch, LAMBDA).unwrap();
        assert_eq!(report.success_rate, 1.0, "scripted chaser should always score");
        assert!(report.mean_episode_length < 600.0);
        assert!(report.mean_vel_to_ball > 0.0);
    }

    #[test]
    fn random_policy_rarely_scores() {
        let pitch = PitchConfig::default();
        let mut team0: Vec<Box<dyn Policy>> =
            vec![Box::new(RandomPolicy { rng: ChaCha8Rng::seed_from_u64(5) })];
        let mut team1: Vec<Box<dyn Policy>> = vec![];
        let report =
            evaluate(&mut team0, &mut team1, StageId::S1_1v0, 30, 4, &pitch, LAMBDA).unwrap();
        assert!(report.success_rate < 0.35, "random policy scored {}", report.success_rate);
    }

    #[test]
    fn evaluation_is_deterministic() {
        let pitch = PitchConfig::default();
        let run = || {
            let mut team0: Vec<Box<dyn Policy>> = vec![Box::new(ChaserPolicy::new())];
            let mut team1: Vec<Box<dyn Policy>> = vec![Box::new(ZeroPolicy)];
            evaluate(&mut team0, &mut team1, StageId::S2_1v1, 20, 9, &pitch, LAMBDA).unwrap()
        };
        assert_eq!(run(), run());
    }

    // -- pareto ---------------------------------------------------------

    #[test]
    fn pareto_examples() {
        let pts = vec![(300.0, 0.4), (250.0, 0.5), (280.0, 0.45)];
        assert_eq!(pareto_front(&pts), vec![1]);
        assert_eq!(pareto_front(&[(200.0, 0.3)]), vec![0]);
        // Incomparable pair: lower length but also lower vel.
        assert_eq!(pareto_front(&[(200.0, 0.3), (250.0, 0.5)]), vec![0, 1]);
        // Ties never dominate.
        assert_eq!(pareto_front(&[(200.0, 0.3), (200.0, 0.3)]), vec![0, 1]);
    }

    #[test]
    fn pareto_matches_brute_force_on_random_sets() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..200 {
            let n = rng.gen_range(1..20);
            let pts: Vec<(f64, f64)> = (0..n)
                .map(|_| (rng.gen_range(100.0..600.0), rng.gen_range(0.0..3.0)))
                .collect();
            let front = pareto_front(&pts);
            for i in 0..n {
                let dominated = (0..n).any(|j| j != i && pts[j].0 < pts[i].0 && pts[j].1 > pts[i].1);
                assert_eq!(!dominated, front.contains(&i));
            }
        }
    }

    // -- round robin ----------------------------------------------------

    #[test]
    fn scripted_round_robin_matches_script_exactly() {
        // Agent 0 beats everyone, 1 beats 2, draws otherwise.
        let payoff = round_robin(3, 4, 7, |i, j, _seed| {
            Ok(match (i, j) {
                (0, _) => 1,
                (1, 2) => 1,
                _ => 0,
            })
        })
        .unwrap();
        assert_eq!(payoff.get(0, 1), 1.0);
        assert_eq!(payoff.get(0, 2), 1.0);
        assert_eq!(payoff.get(1, 2), 1.0);
        assert_eq!(payoff.get(1, 0), -1.0);
        assert_eq!(payoff.get(2, 0), -1.0);
        assert_eq!(payoff.get(2, 1), -1.0);
        assert_eq!(payoff.max_asymmetry(), 0.0);
        for i in 0..3 {
            assert_eq!(payoff.get(i, i), 0.0);
        }
    }

    #[test]
    fn round_robin_seeds_are_reproducible() {
        let mut seen = Vec::new();
        let _ = round_robin(3, 2, 42, |_, _, seed| {
            seen.push(seed);
            Ok(0)
        })
        .unwrap();
        let mut again = Vec::new();
        let _ = round_robin(3, 2, 42, |_, _, seed| {
            again.push(seed);
            Ok(0)
        })
        .unwrap();
        assert_eq!(seen, again);
        assert_eq!(seen.len(), 6);
    }

    #[test]
    fn team_formation_count_matches_construction() {
        assert_eq!(team_count(11), 66);
        assert_eq!(team_count(1), 1);
        assert_eq!(team_count(4), 10);
    }

    // -- nash -----------------------------------------------------------

    fn rps() -> PayoffMatrix {
        PayoffMatrix::from_rows(&[
            vec![0.0, 1.0, -1.0],
            vec![-1.0, 0.0, 1.0],
            vec![1.0, -1.0, 0.0],
        ])
        .unwrap()
    }

    #[test]
    fn nash_of_rps_is_uniform() {
        let result = maxent_nash(&rps(), 1e-8).unwrap();
        for v in &result.p_star {
            assert!((v - 1.0 / 3.0).abs() < 1e-9, "p = {:?}", result.p_star);
        }
        for r in &result.ratings {
            assert!(r.abs() <= 1e-8);
        }
    }

    #[test]
    fn nash_of_dominance_game_is_pure() {
        let a = PayoffMatrix::from_rows(&[vec![0.0, 1.0], vec![-1.0, 0.0]]).unwrap();
        let result = maxent_nash(&a, 1e-8).unwrap();
        assert!((result.p_star[0] - 1.0).abs() < 1e-8);
        assert!(result.p_star[1].abs() < 1e-8);
        assert!(result.ratings[0].abs() < 1e-9);
        assert!((result.ratings[1] + 1.0).abs() < 1e-6);
    }

    #[test]
    fn nash_of_zero_matrix_is_uniform_maxent() {
        let a = PayoffMatrix::zeros(3);
        let result = maxent_nash(&a, 1e-8).unwrap();
        for v in &result.p_star {
            assert_eq!(*v, 1.0 / 3.0);
        }
        assert!(result.ratings.iter().all(|&r| r == 0.0));
    }

    #[test]
    fn weighted_rps_recovers_exact_mixture() {
        // Unique equilibrium (1/2, 1/4, 1/4).
        let a = PayoffMatrix::from_rows(&[
            vec![0.0, 1.0, -1.0],
            vec![-1.0, 0.0, 2.0],
            vec![1.0, -2.0, 0.0],
        ])
        .unwrap();
        let result = maxent_nash(&a, 1e-8).unwrap();
        assert!((result.p_star[0] - 0.5).abs() < 1e-9);
        assert!((result.p_star[1] - 0.25).abs() < 1e-9);
        assert!((result.p_star[2] - 0.25).abs() < 1e-9);
    }

    /// Exhaustive simplex grid oracle for small matrices: all grid points
    /// with A·p ≤ grid_tol, maximum entropy first.
    fn grid_search_oracle(a: &PayoffMatrix, steps: usize) -> Vec<f64> {
        let n = a.n();
        assert!(n == 2 || n == 3, "oracle supports n ≤ 3");
        let mut best: Option<(f64, Vec<f64>)> = None;
        let mut consider = |p: Vec<f64>| {
            let r = a.ratings(&p);
            let feasible = r.iter().all(|&x| x <= 1e-9);
            if feasible {
                let h = entropy(&p);
                if best.as_ref().map(|(bh, _)| h > *bh).unwrap_or(true) {
                    best = Some((h, p));
                }
            }
        };
        if n == 2 {
            for i in 0..=steps {
                let x = i as f64 / steps as f64;
                consider(vec![x, 1.0 - x]);
            }
        } else {
            for i in 0..=steps {
                for j in 0..=(steps - i) {
                    let x = i as f64 / steps as f64;
                    let y = j as f64 / steps as f64;
                    consider(vec![x, y, 1.0 - x - y]);
                }
            }
        }
        best.expect("grid oracle found no equilibrium").1
    }

    #[test]
    fn nash_matches_grid_search_oracle() {
        // Dominance game: the oracle grid contains the exact vertex.
        let a = PayoffMatrix::from_rows(&[vec![0.0, 1.0], vec![-1.0, 0.0]]).unwrap();
        let oracle = grid_search_oracle(&a, 60);
        let solved = maxent_nash(&a, 1e-8).unwrap();
        for (s, o) in solved.p_star.iter().zip(&oracle) {
            assert!((s - o).abs() < 1e-6);
        }
        // RPS: the grid contains the exact uniform point.
        let oracle = grid_search_oracle(&rps(), 60);
        let solved = maxent_nash(&rps(), 1e-8).unwrap();
        for (s, o) in solved.p_star.iter().zip(&oracle) {
            assert!((s - o).abs() < 1e-6);
        }
    }

    fn random_antisymmetric(n: usize, rng: &mut ChaCha8Rng) -> PayoffMatrix {
        let mut a = PayoffMatrix::zeros(n);
        for i in 0..n {
            for j in (i + 1)..n {
                let v = rng.gen_range(-1.0..1.0);
                a.set(i, j, v);
                a.set(j, i, -v);
            }
        }
        a
    }

    #[test]
    fn random_games_meet_certificate() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for trial in 0..60 {
            let n = rng.gen_range(2..=8);
            let a = random_antisymmetric(n, &mut rng);
            let result = maxent_nash(&a, 1e-8).unwrap();
            let sum: f64 = result.p_star.iter().sum();
            assert!((sum - 1.0).abs() < 1e-12, "trial {trial}");
            assert!(result.p_star.iter().all(|&p| p >= 0.0));
            assert!(result.residual <= 1e-8, "trial {trial}: residual {}", result.residual);
        }
    }

    #[test]
    fn duplicating_an_agent_leaves_other_ratings_unchanged() {
        let mut rng = ChaCha8Rng::seed_from_u64(123);
        for trial in 0..40 {
            let n = rng.gen_range(2..=7);
            let a = random_antisymmetric(n, &mut rng);
            let base = maxent_nash(&a, 1e-8).unwrap();
            let k = rng.gen_range(0..n);
            let dup = a.with_duplicated(k);
            let with_copy = maxent_nash(&dup, 1e-8).unwrap();
            for i in 0..n {
                assert!(
                    (base.ratings[i] - with_copy.ratings[i]).abs() < 1e-6,
                    "trial {trial}: rating {i} moved {} -> {}",
                    base.ratings[i],
                    with_copy.ratings[i]
                );
            }
            // Duplicates share their mass evenly and rate identically.
            assert!((with_copy.ratings[k] - with_copy.ratings[n]).abs() < 1e-9);
            let argmax = |r: &[f64], limit: usize| {
                (0..limit).fold(0, |b, i| if r[i] > r[b] { i } else { b })
            };
            assert_eq!(argmax(&base.ratings, n), argmax(&with_copy.ratings, n), "trial {trial}");
        }
    }

    #[test]
    fn exhausted_budget_is_a_solver_error() {
        let a = PayoffMatrix::from_rows(&[vec![0.0, 0.25], vec![-0.25, 0.0]]).unwrap();
        match maxent_nash_with_budget(&a, 1e-12, 0) {
            Err(Error::Solver(msg)) => assert!(msg.contains("residual"), "{msg}"),
            other => panic!("expected solver error, got {:?}", other.map(|r| r.p_star)),
        }
    }

    #[test]
    fn non_antisymmetric_matrix_rejected() {
        let a = PayoffMatrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        assert!(matches!(maxent_nash(&a, 1e-8), Err(Error::Contract(_))));
    }

    // -- selection ------------------------------------------------------

    #[test]
    fn percentile_is_nearest_rank() {
        let vals = vec![0.1, 0.9, 0.5, 0.7];
        assert_eq!(percentile(&vals, 0.95), 0.9);
        assert_eq!(percentile(&vals, 0.5), 0.5);
        assert_eq!(percentile(&[0.3], 0.95), 0.3);
    }
}
