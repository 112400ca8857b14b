//! Simulated-time accounting. The simulator never sleeps; every operation
//! that would take time on hardware appends an entry here instead.

/// Clock and bus constants used to convert payloads into durations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimingConfig {
    /// IP core clock. Compute entries charge `cycles / core_clock_hz`.
    pub core_clock_hz: f64,
    /// Width of the host<->fabric data bus in bytes.
    pub bus_width_bytes: u32,
    /// Host<->fabric bus clock. Transfers charge
    /// `ceil(bytes / bus_width_bytes) / bus_clock_hz`.
    pub bus_clock_hz: f64,
    /// Full-fabric configuration latency charged per `config` call.
    pub config_latency_s: f64,
}

impl Default for TimingConfig {
    fn default() -> Self {
        Self {
            core_clock_hz: 62.5e6,
            bus_width_bytes: 2,
            // Memory-mapped 16-bit host bus; slow enough that shipping a
            // frame dominates the accelerated compute, which is the regime
            // this platform models.
            bus_clock_hz: 2e6,
            config_latency_s: 2.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    Config,
    Tx,
    Compute,
    Rx,
}

/// One accounted event. `payload` is bytes for Tx/Rx and cycles for
/// Compute; zero for Config.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LedgerEntry {
    pub kind: EventKind,
    pub seconds: f64,
    pub payload: u64,
}

/// Per-kind duration sums plus the grand total.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TimingBreakdown {
    pub config: f64,
    pub tx: f64,
    pub compute: f64,
    pub rx: f64,
    pub total: f64,
}

#[derive(Debug, Clone)]
pub struct TimingLedger {
    config: TimingConfig,
    entries: Vec<LedgerEntry>,
}

impl TimingLedger {
    pub fn new(config: TimingConfig) -> Self {
        Self {
            config,
            entries: Vec::new(),
        }
    }

    pub fn config(&self) -> &TimingConfig {
        &self.config
    }

    pub fn entries(&self) -> &[LedgerEntry] {
        &self.entries
    }

    /// Total simulated time: exactly the in-order fold of entry durations.
    pub fn total(&self) -> f64 {
        self.entries.iter().fold(0.0, |acc, e| acc + e.seconds)
    }

    pub fn breakdown(&self) -> TimingBreakdown {
        let mut b = TimingBreakdown::default();
        for e in &self.entries {
            match e.kind {
                EventKind::Config => b.config += e.seconds,
                EventKind::Tx => b.tx += e.seconds,
                EventKind::Compute => b.compute += e.seconds,
                EventKind::Rx => b.rx += e.seconds,
            }
            b.total += e.seconds;
        }
        b
    }

    pub fn charge_config(&mut self, seconds: f64) {
        self.entries.push(LedgerEntry {
            kind: EventKind::Config,
            seconds,
            payload: 0,
        });
    }

    pub fn charge_transfer(&mut self, kind: EventKind, bytes: u64) {
        debug_assert!(matches!(kind, EventKind::Tx | EventKind::Rx));
        let words = bytes.div_ceil(self.config.bus_width_bytes as u64);
        self.entries.push(LedgerEntry {
            kind,
            seconds: words as f64 / self.config.bus_clock_hz,
            payload: bytes,
        });
    }

    pub fn charge_compute(&mut self, cycles: u64) {
        self.entries.push(LedgerEntry {
            kind: EventKind::Compute,
            seconds: cycles as f64 / self.config.core_clock_hz,
            payload: cycles,
        });
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ledger_50mhz() -> TimingLedger {
        TimingLedger::new(TimingConfig {
            bus_clock_hz: 50e6,
            ..Default::default()
        })
    }

    #[test]
    fn transfer_duration_formula() {
        let mut ledger = ledger_50mhz();
        ledger.charge_transfer(EventKind::Tx, 1000);
        // 500 bus words over a 2-byte bus at 50 MHz
        assert_eq!(ledger.entries()[0].seconds, 500.0 / 50e6);
        ledger.charge_transfer(EventKind::Rx, 3);
        assert_eq!(ledger.entries()[1].seconds, 2.0 / 50e6); // ceil(3/2)
    }

    #[test]
    fn compute_duration_formula() {
        let mut ledger = ledger_50mhz();
        ledger.charge_compute(62_500_000);
        assert_eq!(ledger.entries()[0].seconds, 1.0);
    }

    #[test]
    fn total_is_the_fold_of_entries() {
        let mut ledger = ledger_50mhz();
        ledger.charge_config(2.0);
        ledger.charge_transfer(EventKind::Tx, 307_200);
        ledger.charge_compute(3_148_800);
        ledger.charge_transfer(EventKind::Rx, 44);
        let by_hand = ledger.entries().iter().fold(0.0, |a, e| a + e.seconds);
        assert_eq!(ledger.total(), by_hand);
        let b = ledger.breakdown();
        assert_eq!(b.config, 2.0);
        assert_eq!(b.tx, 153_600.0 / 50e6);
    }

    #[test]
    fn appending_grows_total_by_exactly_the_event() {
        let mut ledger = ledger_50mhz();
        ledger.charge_transfer(EventKind::Tx, 10);
        let before = ledger.total();
        ledger.charge_compute(125);
        let event = ledger.entries().last().unwrap().seconds;
        assert_eq!(ledger.total(), before + event);
    }
}
