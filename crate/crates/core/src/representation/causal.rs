use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Read-only access to path values that records every read together with the
/// current construction time. A read of an index later than `now` is a
/// look-ahead.
#[derive(Debug, Clone)]
pub struct CausalView<'a> {
    values: &'a [f64],
    now: usize,
    log: Vec<(usize, usize)>,
}

/// Summary of the reads made through a [`CausalView`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CausalityAudit {
    pub reads: usize,
    pub violations: usize,
    /// SHA-256 of the `(now, index)` log as little-endian `u64` pairs.
    pub digest: String,
}

impl CausalityAudit {
    pub fn ok(&self) -> bool {
        self.violations == 0
    }
}

impl<'a> CausalView<'a> {
    pub fn new(values: &'a [f64]) -> Self {
        CausalView {
            values,
            now: 0,
            log: Vec::new(),
        }
    }

    /// Moves the construction clock. It never goes backwards.
    pub fn advance(&mut self, now: usize) {
        self.now = self.now.max(now);
    }

    pub fn now(&self) -> usize {
        self.now
    }

    pub fn read(&mut self, index: usize) -> f64 {
        self.log.push((self.now, index));
        self.values[index]
    }

    pub fn log(&self) -> &[(usize, usize)] {
        &self.log
    }

    pub fn audit(&self) -> CausalityAudit {
        let mut h = Sha256::new();
        for &(now, idx) in &self.log {
            h.update((now as u64).to_le_bytes());
            h.update((idx as u64).to_le_bytes());
        }
        let digest = h.finalize().iter().map(|b| format!("{b:02x}")).collect();
        CausalityAudit {
            reads: self.log.len(),
            violations: self.log.iter().filter(|(now, idx)| idx > now).count(),
            digest,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_look_ahead() {
        let v = [0.0, 1.0, 2.0];
        let mut view = CausalView::new(&v);
        view.advance(1);
        assert_eq!(view.read(1), 1.0);
        assert!(view.audit().ok());
        view.read(2);
        let a = view.audit();
        assert_eq!((a.reads, a.violations), (2, 1));
        assert_eq!(a.digest.len(), 64);
        view.advance(0);
        assert_eq!(view.now(), 1);
    }
}
