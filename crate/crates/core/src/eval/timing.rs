use std::time::{Duration, Instant};

use serde::Serialize;

/// Accumulates wall-clock time per named stage, in first-use order.
#[derive(Debug)]
pub struct StageTimer {
    start: Instant,
    stages: Vec<(String, Duration)>,
}

impl Default for StageTimer {
    fn default() -> Self {
        Self::new()
    }
}

impl StageTimer {
    pub fn new() -> Self {
        Self {
            start: Instant::now(),
            stages: Vec::new(),
        }
    }

    pub fn add(&mut self, stage: &str, d: Duration) {
        match self.stages.iter_mut().find(|(n, _)| n == stage) {
            Some((_, t)) => *t += d,
            None => self.stages.push((stage.to_string(), d)),
        }
    }

    pub fn time<R>(&mut self, stage: &str, f: impl FnOnce() -> R) -> R {
        let t = Instant::now();
        let r = f();
        self.add(stage, t.elapsed());
        r
    }

    pub fn finish(self) -> StageTimings {
        let total = self.start.elapsed();
        StageTimings {
            stages: self.stages.into_iter().map(|(n, d)| (n, d.as_secs_f64() * 1e3)).collect(),
            total_ms: total.as_secs_f64() * 1e3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageTimings {
    pub stages: Vec<(String, f64)>,
    pub total_ms: f64,
}

impl StageTimings {
    pub fn stage_sum_ms(&self) -> f64 {
        self.stages.iter().map(|(_, t)| t).sum()
    }

    pub fn get(&self, stage: &str) -> Option<f64> {
        self.stages.iter().find(|(n, _)| n == stage).map(|(_, t)| *t)
    }

    /// `{stage: ms, ..., "total": ms}`
    pub fn to_json(&self) -> serde_json::Value {
        let mut m = serde_json::Map::new();
        for (n, t) in &self.stages {
            m.insert(n.clone(), (*t).into());
        }
        m.insert("total".into(), self.total_ms.into());
        serde_json::Value::Object(m)
    }
}
