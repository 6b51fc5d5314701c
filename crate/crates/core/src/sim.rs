//! The repeated contract game under the dynamic contract.
//!
//! Every round the principal issues `w_i = X_i (λ − X_1 − X_2)`, each agent
//! accepts iff `λ > 0` and its expected utility for the round is
//! nonnegative, accepted agents exert effort and the principal pays on the
//! realized outputs. After every `n` rounds (except the last window) the
//! principal looks back over the window: any rejection, or an `H1` verdict for
//! both agents, sets `λ ← 0` for the rest of the horizon. Punishment is never
//! lifted.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::collusion::CollusionPlan;
use crate::detection::{test_center, trial_rng, DetectionConfig, Hypothesis};
use crate::equilibrium::{cournot_efforts, lambda_star, CournotSolution};
use crate::model::{
    agent_expected_utility, Agent, AgentType, ContractParams, EffortProfile, NoiseSpec,
};
use crate::{Error, Result};

/// Acceptance slack for the participation check, so an agent held exactly at
/// zero expected utility by the floor still accepts.
const PARTICIPATION_SLACK: f64 = 1e-12;

/// Effort sequence for a scripted agent, cycled over rounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffortSchedule(Vec<f64>);

impl EffortSchedule {
    pub fn new(efforts: Vec<f64>) -> Result<Self> {
        if efforts.is_empty() {
            return Err(Error::invalid(
                "effort schedule",
                "must hold at least one effort",
            ));
        }
        if efforts.iter().any(|a| !a.is_finite()) {
            return Err(Error::invalid("effort schedule", "efforts must be finite"));
        }
        Ok(Self(efforts))
    }

    /// Effort for 1-based round `k`, clamped at zero.
    pub fn effort(&self, k: usize) -> f64 {
        self.0[(k - 1) % self.0.len()].max(0.0)
    }

    pub fn efforts(&self) -> &[f64] {
        &self.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum AgentPolicy {
    /// Plays its Cournot effort at the current contract.
    Honest,
    /// Plays its share of the plan every round, never adapting.
    Colluding(CollusionPlan),
    Custom(EffortSchedule),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ContractMode {
    /// Windowed detection with absorbing punishment.
    #[default]
    Dynamic,
    /// The initial contract is kept for the whole horizon.
    Static,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    Normal,
    Punished,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RoundRecord {
    /// 1-based round index.
    pub k: usize,
    pub lambda: f64,
    pub regime: Regime,
    pub accepted: [bool; 2],
    pub efforts: EffortProfile,
    /// `None` for an agent that rejected the contract.
    pub outputs: [Option<f64>; 2],
    pub payments: [f64; 2],
    /// Transfer from the plan's payer to its partner.
    pub side_payment: f64,
    /// Test verdicts when this round closes a tested window.
    pub flags: Option<[Hypothesis; 2]>,
    /// Realized utilities of agent 1, agent 2 and the principal.
    pub utilities: [f64; 3],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DetectionEvent {
    pub round: usize,
    pub hypotheses: [Hypothesis; 2],
}

/// Everything about an episode except the per-round records.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpisodeSummary {
    pub seed: u64,
    pub horizon: usize,
    pub window: usize,
    pub initial_lambda: f64,
    pub final_lambda: f64,
    /// Round after which `λ ← 0` was applied.
    pub punished_at: Option<usize>,
    pub detection_events: Vec<DetectionEvent>,
    /// Realized utility totals: agent 1, agent 2, principal.
    pub cumulative_utilities: [f64; 3],
}

impl EpisodeSummary {
    pub fn average_utilities(&self) -> [f64; 3] {
        self.cumulative_utilities.map(|u| u / self.horizon as f64)
    }

    /// 1-based index of the window whose test triggered punishment.
    pub fn punishment_window(&self) -> Option<usize> {
        self.punished_at.map(|k| k / self.window)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpisodeTrace {
    pub summary: EpisodeSummary,
    pub rounds: Vec<RoundRecord>,
}

/// Per-round averages of the realized utilities of agent 1, agent 2 and the
/// principal.
pub fn long_run_average_utilities(trace: &EpisodeTrace) -> [f64; 3] {
    trace.summary.average_utilities()
}

/// Smallest horizon `K₀` from which `agent`'s running average utility stays
/// strictly below `reference` through the end of the trace.
pub fn rent_crossover(trace: &EpisodeTrace, agent: Agent, reference: f64) -> Option<usize> {
    let mut total = 0.0;
    let running: Vec<f64> = trace
        .rounds
        .iter()
        .map(|r| {
            total += r.utilities[agent.index()];
            total / r.k as f64
        })
        .collect();
    let below_from = running
        .iter()
        .rposition(|&avg| avg >= reference)
        .map_or(0, |p| p + 1);
    (below_from < running.len()).then(|| below_from + 1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Serial,
    #[default]
    Parallel,
}

/// A fully specified repeated game.
#[derive(Debug, Clone, PartialEq)]
pub struct Episode {
    pub types: [AgentType; 2],
    pub noise: NoiseSpec,
    pub policies: [AgentPolicy; 2],
    pub detection: DetectionConfig,
    pub horizon: usize,
    pub mode: ContractMode,
    /// Contract for the first window; `None` issues the principal's optimum.
    pub initial_contract: Option<ContractParams>,
}

impl Episode {
    pub fn new(
        types: [AgentType; 2],
        noise: NoiseSpec,
        policies: [AgentPolicy; 2],
        detection: DetectionConfig,
        horizon: usize,
    ) -> Result<Self> {
        if horizon < detection.window() {
            return Err(Error::HorizonTooShort {
                horizon,
                window: detection.window(),
            });
        }
        Ok(Self {
            types,
            noise,
            policies,
            detection,
            horizon,
            mode: ContractMode::Dynamic,
            initial_contract: None,
        })
    }

    pub fn with_mode(mut self, mode: ContractMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn with_initial_contract(mut self, contract: ContractParams) -> Self {
        self.initial_contract = Some(contract);
        self
    }

    /// Equilibrium under the first-window contract; the test centers come from it.
    pub fn solution(&self) -> CournotSolution {
        match self.initial_contract {
            Some(c) => CournotSolution::at_lambda(&self.types, &self.noise, &c),
            None => lambda_star(&self.types, &self.noise),
        }
    }

    pub fn run(&self, seed: u64) -> EpisodeTrace {
        self.run_with_rng(seed, &mut trial_rng(seed, 0))
    }

    pub fn summarize(&self, seed: u64) -> EpisodeSummary {
        self.play(seed, &mut trial_rng(seed, 0), |_| {})
    }

    /// Runs `count` episodes; episode `e` draws from stream `e` of `seed`.
    /// Serial and parallel execution give identical results.
    pub fn run_many(&self, seed: u64, count: usize, execution: Execution) -> Vec<EpisodeSummary> {
        let one = |e: usize| self.play(seed, &mut trial_rng(seed, e as u64), |_| {});
        match execution {
            Execution::Serial => (0..count).map(one).collect(),
            Execution::Parallel => (0..count).into_par_iter().map(one).collect(),
        }
    }

    /// Full trace of episode `index` of a [`Episode::run_many`] campaign.
    pub fn run_indexed(&self, seed: u64, index: usize) -> EpisodeTrace {
        self.run_with_rng(seed, &mut trial_rng(seed, index as u64))
    }

    fn run_with_rng<R: Rng>(&self, seed: u64, rng: &mut R) -> EpisodeTrace {
        let mut rounds = Vec::with_capacity(self.horizon);
        let summary = self.play(seed, rng, |r| rounds.push(r.clone()));
        EpisodeTrace { summary, rounds }
    }

    fn play<R: Rng, F: FnMut(&RoundRecord)>(
        &self,
        seed: u64,
        rng: &mut R,
        mut sink: F,
    ) -> EpisodeSummary {
        let solution = self.solution();
        let centers = Agent::BOTH.map(|i| test_center(&self.types, &solution, i));
        let n = self.detection.window();
        let initial = solution.contract();
        let mut contract = initial;
        let mut regime = Regime::Normal;
        let mut punished_at = None;
        let mut events = Vec::new();
        let mut cumulative = [0.0; 3];
        let mut window: [Vec<f64>; 2] = [Vec::with_capacity(n), Vec::with_capacity(n)];
        let mut rejected_in_window = false;

        for k in 1..=self.horizon {
            let mut record = self.play_round(k, &contract, regime, rng);
            for (total, u) in cumulative.iter_mut().zip(record.utilities) {
                *total += u;
            }
            rejected_in_window |= !(record.accepted[0] && record.accepted[1]);
            for (samples, x) in window.iter_mut().zip(record.outputs) {
                samples.extend(x);
            }

            if k % n == 0 && k < self.horizon && self.mode == ContractMode::Dynamic {
                if rejected_in_window {
                    if !contract.is_punishment() {
                        punished_at = Some(k);
                    }
                    contract = ContractParams::PUNISHMENT;
                    regime = Regime::Punished;
                } else {
                    let hypotheses = Agent::BOTH.map(|i| {
                        crate::detection::run_test(
                            &window[i.index()],
                            &centers[i.index()],
                            &self.detection,
                        )
                        .expect("a window without rejections holds n outputs")
                    });
                    events.push(DetectionEvent {
                        round: k,
                        hypotheses,
                    });
                    record.flags = Some(hypotheses);
                    if hypotheses.iter().all(|h| h.is_flag()) {
                        punished_at = Some(k);
                        contract = ContractParams::PUNISHMENT;
                        regime = Regime::Punished;
                    }
                }
                window.iter_mut().for_each(Vec::clear);
                rejected_in_window = false;
            }
            sink(&record);
        }

        EpisodeSummary {
            seed,
            horizon: self.horizon,
            window: n,
            initial_lambda: initial.lambda(),
            final_lambda: contract.lambda(),
            punished_at,
            detection_events: events,
            cumulative_utilities: cumulative,
        }
    }

    fn intended_effort(&self, agent: Agent, k: usize, contract: &ContractParams) -> f64 {
        match &self.policies[agent.index()] {
            AgentPolicy::Honest => cournot_efforts(&self.types, contract).get(agent),
            AgentPolicy::Colluding(plan) => plan.efforts.get(agent),
            AgentPolicy::Custom(schedule) => schedule.effort(k),
        }
    }

    /// The side-payment plan in force, if both agents follow the same
    /// delegation plan.
    fn shared_plan(&self) -> Option<&CollusionPlan> {
        match &self.policies {
            [AgentPolicy::Colluding(a), AgentPolicy::Colluding(b)]
                if a == b && a.payer.is_some() =>
            {
                Some(a)
            }
            _ => None,
        }
    }

    fn abstains(&self, agent: Agent) -> bool {
        self.shared_plan().and_then(CollusionPlan::abstaining) == Some(agent)
    }

    fn play_round<R: Rng>(
        &self,
        k: usize,
        contract: &ContractParams,
        regime: Regime,
        rng: &mut R,
    ) -> RoundRecord {
        let intended = EffortProfile::clamped(
            self.intended_effort(Agent::First, k, contract),
            self.intended_effort(Agent::Second, k, contract),
        );
        let plan = self.shared_plan();
        let accepted = Agent::BOTH.map(|i| {
            if contract.is_punishment() {
                return false;
            }
            let transfer = plan.map_or(0.0, |p| p.transfer_to(i));
            let own = if self.abstains(i) {
                0.0
            } else {
                agent_expected_utility(i, &intended, &self.types, &self.noise, contract)
            };
            own + transfer >= -PARTICIPATION_SLACK
        });

        // both noise draws happen every round, accepted or not
        let eta = [self.noise.sample(rng), self.noise.sample(rng)];
        let efforts = EffortProfile::clamped(
            if accepted[0] { intended.a1() } else { 0.0 },
            if accepted[1] { intended.a2() } else { 0.0 },
        );
        let outputs = Agent::BOTH.map(|i| {
            let idx = i.index();
            if !accepted[idx] {
                None
            } else if self.abstains(i) {
                Some(0.0)
            } else {
                Some(efforts.get(i) + self.types[idx].quality_scale() * eta[idx])
            }
        });
        let realized = outputs.map(|x| x.unwrap_or(0.0));
        let payments = Agent::BOTH.map(|i| {
            if accepted[i.index()] {
                contract.payment(i, realized)
            } else {
                0.0
            }
        });
        let side_payment = match plan {
            Some(p) if accepted[0] && accepted[1] => p.transfer,
            _ => 0.0,
        };
        let mut utilities = [0.0; 3];
        for i in Agent::BOTH {
            let idx = i.index();
            let transfer = if side_payment != 0.0 {
                plan.map_or(0.0, |p| p.transfer_to(i))
            } else {
                0.0
            };
            utilities[idx] = payments[idx] - self.types[idx].cost(efforts.get(i)) + transfer;
        }
        utilities[2] = realized[0] + realized[1] - payments[0] - payments[1];

        RoundRecord {
            k,
            lambda: contract.lambda(),
            regime,
            accepted,
            efforts,
            outputs,
            payments,
            side_payment,
            flags: None,
            utilities,
        }
    }
}

/// Runs the dynamic contract from the principal's optimal `λ*`.
pub fn run_episode(
    types: [AgentType; 2],
    noise: NoiseSpec,
    policies: [AgentPolicy; 2],
    detection: DetectionConfig,
    horizon: usize,
    seed: u64,
) -> Result<EpisodeTrace> {
    Ok(Episode::new(types, noise, policies, detection, horizon)?.run(seed))
}

#[cfg(test)]
mod tests {
    use approx::assert_abs_diff_eq;

    use super::*;
    use crate::collusion::{delegation_plan, same_type_plan};

    fn pair(t1: f64, t2: f64) -> [AgentType; 2] {
        [AgentType::new(t1).unwrap(), AgentType::new(t2).unwrap()]
    }

    fn honest() -> [AgentPolicy; 2] {
        [AgentPolicy::Honest, AgentPolicy::Honest]
    }

    fn colluding(theta: f64, lambda: f64) -> [AgentPolicy; 2] {
        let plan = same_type_plan(
            &AgentType::new(theta).unwrap(),
            &ContractParams::new(lambda).unwrap(),
            theta,
        )
        .unwrap();
        [AgentPolicy::Colluding(plan), AgentPolicy::Colluding(plan)]
    }

    #[test]
    fn rejects_horizon_shorter_than_window() {
        let err = run_episode(
            pair(1.0, 1.0),
            NoiseSpec::none(),
            honest(),
            DetectionConfig::new(10, 0.1).unwrap(),
            5,
            0,
        )
        .unwrap_err();
        assert!(matches!(
            err,
            Error::HorizonTooShort {
                horizon: 5,
                window: 10
            }
        ));
    }

    #[test]
    fn noiseless_honest_window_is_stationary() {
        let n = 25;
        let trace = run_episode(
            pair(1.0, 1.0),
            NoiseSpec::none(),
            honest(),
            DetectionConfig::new(n, 0.01).unwrap(),
            n,
            3,
        )
        .unwrap();
        assert_eq!(trace.rounds.len(), n);
        for r in &trace.rounds {
            assert_eq!(r.lambda, 1.0);
            assert_eq!(r.efforts.as_array(), [0.25, 0.25]);
            assert_eq!(r.outputs, [Some(0.25), Some(0.25)]);
            assert_eq!(r.payments, [0.125, 0.125]);
            assert_eq!(r.regime, Regime::Normal);
        }
        let avg = long_run_average_utilities(&trace);
        assert_abs_diff_eq!(avg[0], 0.09375, epsilon = 1e-15);
        assert_abs_diff_eq!(avg[1], 0.09375, epsilon = 1e-15);
        assert_abs_diff_eq!(avg[2], 0.25, epsilon = 1e-15);
    }

    #[test]
    fn noiseless_honest_never_punished() {
        let trace = run_episode(
            pair(1.0, 2.0),
            NoiseSpec::none(),
            honest(),
            DetectionConfig::new(10, 1e-6).unwrap(),
            500,
            3,
        )
        .unwrap();
        assert_eq!(trace.summary.punished_at, None);
        assert_eq!(trace.summary.detection_events.len(), 49);
        assert!(trace
            .summary
            .detection_events
            .iter()
            .all(|e| e.hypotheses == [Hypothesis::H0; 2]));
    }

    #[test]
    fn collusion_is_punished_forever() {
        let noise = NoiseSpec::uniform(0.1).unwrap();
        let trace = run_episode(
            pair(1.0, 1.0),
            noise,
            colluding(1.0, 1.0),
            DetectionConfig::new(500, 0.02).unwrap(),
            5000,
            8,
        )
        .unwrap();
        assert_eq!(trace.summary.punished_at, Some(500));
        assert_eq!(trace.summary.punishment_window(), Some(1));
        for r in &trace.rounds[500..] {
            assert_eq!(r.regime, Regime::Punished);
            assert_eq!(r.lambda, 0.0);
            assert_eq!(r.accepted, [false, false]);
            assert_eq!(r.payments, [0.0, 0.0]);
            assert_eq!(r.outputs, [None, None]);
        }
        assert_eq!(trace.rounds[499].flags, Some([Hypothesis::H1; 2]));
        assert_eq!(trace.summary.final_lambda, 0.0);
    }

    #[test]
    fn lambda_only_changes_at_window_boundaries() {
        let noise = NoiseSpec::uniform(0.3).unwrap();
        let trace = run_episode(
            pair(1.0, 1.0),
            noise,
            colluding(1.0, 1.0),
            DetectionConfig::new(40, 0.05).unwrap(),
            1000,
            1,
        )
        .unwrap();
        for chunk in trace.rounds.chunks(40) {
            assert!(chunk.iter().all(|r| r.lambda == chunk[0].lambda));
        }
        let mut seen_punished = false;
        for r in &trace.rounds {
            seen_punished |= r.regime == Regime::Punished;
            if seen_punished {
                assert_eq!(r.regime, Regime::Punished);
            }
        }
    }

    #[test]
    fn static_contract_keeps_lambda() {
        let noise = NoiseSpec::uniform(0.1).unwrap();
        let ep = Episode::new(
            pair(1.0, 1.0),
            noise,
            colluding(1.0, 1.0),
            DetectionConfig::new(50, 0.02).unwrap(),
            1000,
        )
        .unwrap()
        .with_mode(ContractMode::Static);
        let trace = ep.run(4);
        assert!(trace
            .rounds
            .iter()
            .all(|r| r.lambda == 1.0 && r.regime == Regime::Normal));
        assert!(trace.summary.detection_events.is_empty());
    }

    #[test]
    fn single_deviator_is_never_punished() {
        let noise = NoiseSpec::uniform(0.05).unwrap();
        let policies = [
            AgentPolicy::Honest,
            AgentPolicy::Custom(EffortSchedule::new(vec![0.05]).unwrap()),
        ];
        let trace = run_episode(
            pair(1.0, 1.0),
            noise,
            policies,
            DetectionConfig::new(100, 0.02).unwrap(),
            2000,
            5,
        )
        .unwrap();
        assert_eq!(trace.summary.punished_at, None);
        assert!(trace
            .summary
            .detection_events
            .iter()
            .all(|e| e.hypotheses[1] == Hypothesis::H1));
    }

    #[test]
    fn rejection_triggers_punishment() {
        // negative scripted utility: the custom agent walks away
        let policies = [
            AgentPolicy::Honest,
            AgentPolicy::Custom(EffortSchedule::new(vec![5.0]).unwrap()),
        ];
        let trace = run_episode(
            pair(1.0, 1.0),
            NoiseSpec::none(),
            policies,
            DetectionConfig::new(10, 0.02).unwrap(),
            100,
            5,
        )
        .unwrap();
        assert!(!trace.rounds[0].accepted[1]);
        assert_eq!(trace.rounds[0].outputs[1], None);
        assert_eq!(trace.summary.punished_at, Some(10));
        assert!(trace.summary.detection_events.is_empty());
    }

    #[test]
    fn delegation_side_payment_settles_each_round() {
        let types = pair(3.0, 1.0);
        let c = ContractParams::new(1.0).unwrap();
        let plan = delegation_plan(&types, &NoiseSpec::none(), &c, 0.32).unwrap();
        let ep = Episode::new(
            types,
            NoiseSpec::none(),
            [AgentPolicy::Colluding(plan), AgentPolicy::Colluding(plan)],
            DetectionConfig::new(10, 0.01).unwrap(),
            30,
        )
        .unwrap()
        .with_initial_contract(c)
        .with_mode(ContractMode::Static);
        let trace = ep.run(0);
        let r = &trace.rounds[0];
        assert_eq!(r.side_payment, plan.transfer);
        assert_eq!(r.outputs[1], Some(0.0));
        assert_abs_diff_eq!(r.utilities[1], plan.transfer, epsilon = 1e-15);
        let u = crate::collusion::plan_utilities(&plan, &types, &NoiseSpec::none());
        assert_abs_diff_eq!(r.utilities[0], u[0], epsilon = 1e-15);
    }

    #[test]
    fn runs_are_deterministic_and_schedule_free() {
        let noise = NoiseSpec::uniform(0.2).unwrap();
        let ep = Episode::new(
            pair(1.0, 1.0),
            noise,
            colluding(1.0, 1.0),
            DetectionConfig::new(30, 0.05).unwrap(),
            600,
        )
        .unwrap();
        assert_eq!(ep.run(77), ep.run(77));
        let serial = ep.run_many(77, 16, Execution::Serial);
        let parallel = ep.run_many(77, 16, Execution::Parallel);
        assert_eq!(serial, parallel);
        assert_eq!(ep.run_indexed(77, 5).summary, serial[5]);
    }

    #[test]
    fn crossover_of_running_average() {
        let noise = NoiseSpec::uniform(0.1).unwrap();
        let trace = run_episode(
            pair(1.0, 1.0),
            noise,
            colluding(1.0, 1.0),
            DetectionConfig::new(100, 0.03).unwrap(),
            5000,
            2,
        )
        .unwrap();
        let k0 = rent_crossover(&trace, Agent::First, 0.09375).unwrap();
        assert!(k0 > 100 && k0 < 5000);
    }
}
