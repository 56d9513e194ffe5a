//! Reward series and summary statistics shared by train, evaluate and report.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

pub const RUNNING_WINDOW: usize = 1000;
/// Share of the series the plateau statistic looks at.
pub const PLATEAU_TAIL: f64 = 0.2;

/// One row of rewards.csv.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardRow {
    pub step: u64,
    pub reward: f64,
    pub running_avg_1000: f64,
    pub episode: u64,
    /// Mean reward of the current episode up to and including this step.
    pub episodic_mean: f64,
}

#[derive(Debug, Default)]
pub struct RewardSeries {
    window: VecDeque<f64>,
    window_sum: f64,
    step: u64,
    episode: Option<u64>,
    episode_sum: f64,
    episode_len: u64,
}

impl RewardSeries {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, episode: u64, reward: f64) -> RewardRow {
        self.step += 1;
        self.window.push_back(reward);
        self.window_sum += reward;
        if self.window.len() > RUNNING_WINDOW {
            self.window_sum -= self.window.pop_front().expect("nonempty");
        }
        if self.episode != Some(episode) {
            self.episode = Some(episode);
            self.episode_sum = 0.0;
            self.episode_len = 0;
        }
        self.episode_sum += reward;
        self.episode_len += 1;
        RewardRow {
            step: self.step,
            reward,
            running_avg_1000: self.window_sum / self.window.len() as f64,
            episode,
            episodic_mean: self.episode_sum / self.episode_len as f64,
        }
    }
}

pub fn mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

/// Population standard deviation over mean.
pub fn coefficient_of_variation(xs: &[f64]) -> Option<f64> {
    let m = mean(xs)?;
    let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / xs.len() as f64;
    Some(var.sqrt() / m.abs())
}

/// std/mean of the running average over the final 20% of steps.
pub fn plateau_statistic(running_avg: &[f64]) -> Option<f64> {
    if running_avg.is_empty() {
        return None;
    }
    let tail = ((running_avg.len() as f64 * PLATEAU_TAIL).ceil() as usize).max(1);
    coefficient_of_variation(&running_avg[running_avg.len() - tail..])
}

/// Mean reward of the first and the last `RUNNING_WINDOW` steps.
pub fn head_tail_means(rewards: &[f64]) -> Option<(f64, f64)> {
    let n = rewards.len().min(RUNNING_WINDOW);
    Some((mean(&rewards[..n])?, mean(&rewards[rewards.len() - n..])?))
}

pub fn median(mut xs: Vec<f64>) -> Option<f64> {
    if xs.is_empty() {
        return None;
    }
    xs.sort_by(|a, b| a.total_cmp(b));
    let n = xs.len();
    Some(if n % 2 == 1 {
        xs[n / 2]
    } else {
        (xs[n / 2 - 1] + xs[n / 2]) / 2.0
    })
}
