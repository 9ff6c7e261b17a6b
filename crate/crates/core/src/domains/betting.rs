//! The betting game.
//!
//! The agent starts with some money and, at each of a fixed number of
//! stages, bets an amount from a menu. A win adds the bet, a loss removes it.
//! The only reward is the money held after the last stage. The win
//! probability is unknown and shared by every bet size.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use crate::belief::{BayesMdp, BetaParams, Branch, GroupPrior, Prior, ProbSource};
use crate::error::{Error, Result};
use crate::mdp::MdpSpec;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BettingConfig {
    pub initial_money: usize,
    pub max_money: usize,
    pub stages: usize,
    pub bets: Vec<usize>,
    pub prior: BetaParams,
}

impl Default for BettingConfig {
    fn default() -> Self {
        Self {
            initial_money: 10,
            max_money: 70,
            stages: 6,
            bets: vec![0, 1, 2, 5, 10],
            prior: BetaParams { alpha: 10.0 / 11.0, beta: 1.0 / 11.0 },
        }
    }
}

impl BettingConfig {
    pub fn num_states(&self) -> usize {
        (self.stages + 1) * (self.max_money + 1)
    }

    #[inline]
    pub fn state_index(&self, stage: usize, money: usize) -> usize {
        stage * (self.max_money + 1) + money
    }

    /// `(stage, money)` of a state index.
    #[inline]
    pub fn decode(&self, state: usize) -> (usize, usize) {
        (state / (self.max_money + 1), state % (self.max_money + 1))
    }

    /// Bets that are affordable and keep a win within the money cap.
    pub fn legal_bets(&self, money: usize) -> Vec<usize> {
        (0..self.bets.len())
            .filter(|&i| self.bets[i] <= money && money + self.bets[i] <= self.max_money)
            .collect()
    }

    fn check(&self) -> Result<()> {
        if self.stages == 0 || self.initial_money > self.max_money || self.bets.is_empty() {
            return Err(Error::InvalidConfig("betting game needs stages >= 1 and initial money within the cap".into()));
        }
        if self.bets[0] != 0 {
            return Err(Error::InvalidConfig("the first bet must be 0 so every state has a legal action".into()));
        }
        BetaParams::new(self.prior.alpha, self.prior.beta)?;
        Ok(())
    }
}

/// The betting game as a BAMDP with one Beta-distributed win probability.
pub fn betting_bamdp(cfg: &BettingConfig) -> Result<Arc<BayesMdp>> {
    cfg.check()?;
    let n = cfg.num_states();
    let na = cfg.bets.len();
    let mut legal = vec![Vec::new(); n];
    let mut rows = vec![Vec::new(); n * na];
    let mut terminal = vec![false; n];
    for stage in 0..=cfg.stages {
        for money in 0..=cfg.max_money {
            let s = cfg.state_index(stage, money);
            if stage == cfg.stages {
                terminal[s] = true;
                continue;
            }
            let last = stage + 1 == cfg.stages;
            let reward = |m: usize| if last { m as f64 } else { 0.0 };
            legal[s] = cfg.legal_bets(money);
            for &a in &legal[s] {
                let bet = cfg.bets[a];
                rows[s * na + a] = if bet == 0 {
                    let next = cfg.state_index(stage + 1, money);
                    vec![Branch { next, reward: reward(money), source: ProbSource::Known(1.0) }]
                } else {
                    let (win, lose) = (money + bet, money - bet);
                    vec![
                        Branch {
                            next: cfg.state_index(stage + 1, win),
                            reward: reward(win),
                            source: ProbSource::Latent { group: 0, outcome: 0 },
                        },
                        Branch {
                            next: cfg.state_index(stage + 1, lose),
                            reward: reward(lose),
                            source: ProbSource::Latent { group: 0, outcome: 1 },
                        },
                    ]
                };
            }
        }
    }
    BayesMdp::new(
        n,
        na,
        legal,
        rows,
        terminal,
        cfg.stages,
        cfg.state_index(0, cfg.initial_money),
        Prior::Conjugate(vec![GroupPrior::Beta(cfg.prior)]),
    )
}

/// The betting game with a known win probability.
pub fn betting_game_mdp(cfg: &BettingConfig, p_win: f64) -> Result<MdpSpec> {
    if !(0.0..=1.0).contains(&p_win) {
        return Err(Error::InvalidArgument("p_win must lie in [0, 1]".into()));
    }
    Ok(betting_bamdp(cfg)?.instantiate(&vec![vec![p_win, 1.0 - p_win]]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn bet_index(cfg: &BettingConfig, bet: usize) -> usize {
        cfg.bets.iter().position(|&b| b == bet).unwrap()
    }

    #[test]
    fn generated_mdp_is_valid() {
        let cfg = BettingConfig::default();
        for p in [0.0, 0.3, 10.0 / 11.0, 1.0] {
            let m = betting_game_mdp(&cfg, p).unwrap();
            assert!(m.validate().iter().all(|v| v.is_warning()), "{:?}", m.validate());
            assert_eq!(m.num_states, 7 * 71);
        }
    }

    #[test]
    fn sure_win_doubles_a_ten_bet() {
        let cfg = BettingConfig::default();
        let m = betting_game_mdp(&cfg, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (next, _) = m.step(m.initial_state, bet_index(&cfg, 10), &mut rng).unwrap();
        assert_eq!(cfg.decode(next), (1, 20));
    }

    #[test]
    fn never_betting_returns_ten() {
        let cfg = BettingConfig::default();
        let m = betting_game_mdp(&cfg, 0.5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            assert_eq!(m.simulate(|_, _| 0, &mut rng).unwrap().total_return, 10.0);
        }
    }

    #[test]
    fn sure_loss_ends_at_zero() {
        let cfg = BettingConfig::default();
        let m = betting_game_mdp(&cfg, 0.0).unwrap();
        let ten = bet_index(&cfg, 10);
        let s1 = cfg.state_index(1, 0);
        assert_eq!(m.legal_actions[s1], vec![0]);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let traj = m
            .simulate(|_, s| if m.is_legal(s, ten) { ten } else { 0 }, &mut rng)
            .unwrap();
        assert_eq!(traj.total_return, 0.0);
        assert_eq!(traj.steps.len(), 6);
    }

    /// Always betting 10 (when legal): expectation by enumerating all 2^6
    /// win/loss sequences.
    #[test]
    fn always_bet_ten_expectation() {
        let cfg = BettingConfig::default();
        let p = 10.0 / 11.0;
        let mut expected = 0.0;
        for seq in 0u32..64 {
            let mut money: i64 = 10;
            let mut prob = 1.0;
            let mut consumed = true;
            for k in 0..6 {
                let win = seq >> k & 1 == 1;
                if money >= 10 && money + 10 <= 70 {
                    money += if win { 10 } else { -10 };
                    prob *= if win { p } else { 1.0 - p };
                } else {
                    // bet 0: the outcome bit is irrelevant, count the sequence once
                    if win {
                        consumed = false;
                    }
                }
            }
            if consumed {
                expected += prob * money as f64;
            }
        }
        // dynamic-programming evaluation of the same policy on the MDP
        let m = betting_game_mdp(&cfg, p).unwrap();
        let ten = bet_index(&cfg, 10);
        let mut v = vec![0.0; m.num_states];
        for stage in (0..6).rev() {
            for money in 0..=70 {
                let s = cfg.state_index(stage, money);
                let a = if m.is_legal(s, ten) { ten } else { 0 };
                v[s] = m.row(s, a).iter().map(|o| o.prob * (o.reward + v[o.next])).sum();
            }
        }
        assert!((v[m.initial_state] - expected).abs() < 1e-9);
    }

    #[test]
    fn money_is_conserved_and_nonnegative() {
        let cfg = BettingConfig::default();
        let m = betting_game_mdp(&cfg, 0.5).unwrap();
        for s in 0..m.num_states {
            let (stage, money) = cfg.decode(s);
            for &a in &m.legal_actions[s] {
                for o in m.row(s, a) {
                    let (st2, m2) = cfg.decode(o.next);
                    assert_eq!(st2, stage + 1);
                    assert_eq!((m2 as i64 - money as i64).abs(), cfg.bets[a] as i64);
                }
            }
        }
    }
}
