//! The behavioral contract every mounted IP obeys: a declared register
//! window and the block-level start/done/idle control handshake.
//!
//! The control register lives at offset 0 of each window:
//!
//! | bit | name     | behavior                                   |
//! |-----|----------|--------------------------------------------|
//! | 0   | AP_START | host-write, self-clearing; triggers a run  |
//! | 1   | AP_DONE  | reads 1 once a run finished; clear-on-read |
//! | 2   | AP_IDLE  | reads 1 while the core is idle             |
//! | 3   | AP_READY | mirrors AP_DONE                            |
//!
//! Execution is synchronous inside the simulator: a started core finishes
//! (and latches done) before the start write returns. Simulated time comes
//! from the ledger, never from the wall clock.

use crate::fabric::FabricMemory;

pub const CTRL_OFFSET: u32 = 0x00;

pub const AP_START: u32 = 1 << 0;
pub const AP_DONE: u32 = 1 << 1;
pub const AP_IDLE: u32 = 1 << 2;
pub const AP_READY: u32 = 1 << 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ControlState {
    Idle,
    Busy,
    DoneLatched,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Access {
    ReadWrite,
    ReadOnly,
}

/// One named 32-bit register at a byte offset within the slot window.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegisterDef {
    pub offset: u32,
    pub name: String,
    pub access: Access,
}

impl RegisterDef {
    pub fn new(offset: u32, name: &str, access: Access) -> Self {
        Self {
            offset,
            name: name.to_string(),
            access,
        }
    }
}

/// The register window layout an IP exposes. Must contain the control
/// register at offset 0; offsets are 4-byte aligned, unique, and inside
/// one slot window.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegisterSpec {
    pub registers: Vec<RegisterDef>,
}

impl RegisterSpec {
    pub fn validate(&self, window_bytes: u32) -> Result<(), String> {
        if !self
            .registers
            .iter()
            .any(|r| r.offset == CTRL_OFFSET && r.name == "CTRL")
        {
            return Err("register spec must define CTRL at offset 0".into());
        }
        let mut seen_offsets = std::collections::BTreeSet::new();
        let mut seen_names = std::collections::BTreeSet::new();
        for reg in &self.registers {
            if reg.offset % 4 != 0 {
                return Err(format!("register {} offset {:#x} is misaligned", reg.name, reg.offset));
            }
            if reg.offset + 4 > window_bytes {
                return Err(format!("register {} falls outside the slot window", reg.name));
            }
            if !seen_offsets.insert(reg.offset) {
                return Err(format!("duplicate register offset {:#x}", reg.offset));
            }
            if !seen_names.insert(reg.name.clone()) {
                return Err(format!("duplicate register name {}", reg.name));
            }
        }
        Ok(())
    }

    pub fn find(&self, name: &str) -> Option<&RegisterDef> {
        self.registers.iter().find(|r| r.name == name)
    }
}

/// Outcome of a bus write into a register window.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WriteOutcome {
    /// Value stored in a read-write register.
    Stored,
    /// AP_START accepted from idle; the fabric runs the model now.
    StartAccepted,
    /// AP_START while not idle; dropped, like a busy core ignoring strobes.
    StartIgnored,
    /// Write to a read-only or device-owned register; dropped.
    Ignored,
}

/// A mounted IP's register window: declared registers, their values, and
/// the control state machine.
#[derive(Debug, Clone)]
pub struct RegisterFile {
    spec: RegisterSpec,
    values: Vec<u32>,
    state: ControlState,
}

impl RegisterFile {
    pub fn new(spec: RegisterSpec) -> Self {
        let values = vec![0; spec.registers.len()];
        Self {
            spec,
            values,
            state: ControlState::Idle,
        }
    }

    pub fn spec(&self) -> &RegisterSpec {
        &self.spec
    }

    pub fn state(&self) -> ControlState {
        self.state
    }

    /// True iff a run has finished and its done flag has not been consumed.
    /// Unlike a control-register read this does not clear the flag.
    pub fn poll_done(&self) -> bool {
        self.state == ControlState::DoneLatched
    }

    fn index_of(&self, offset: u32) -> Option<usize> {
        self.spec.registers.iter().position(|r| r.offset == offset)
    }

    /// Side-effect-free register value, as the device model sees it.
    pub fn value(&self, offset: u32) -> Option<u32> {
        if offset == CTRL_OFFSET {
            return Some(self.compose_ctrl());
        }
        self.index_of(offset).map(|i| self.values[i])
    }

    /// Named lookup, for host-side convenience.
    pub fn value_by_name(&self, name: &str) -> Option<u32> {
        self.spec.find(name).and_then(|r| self.value(r.offset))
    }

    fn compose_ctrl(&self) -> u32 {
        match self.state {
            ControlState::Idle => AP_IDLE,
            ControlState::Busy => 0,
            ControlState::DoneLatched => AP_DONE | AP_READY,
        }
    }

    /// Bus read. Reading CTRL while done is latched consumes the flag and
    /// returns the core to idle. `None` means no register at this offset.
    pub fn bus_read(&mut self, offset: u32) -> Option<u32> {
        if offset == CTRL_OFFSET {
            let v = self.compose_ctrl();
            if self.state == ControlState::DoneLatched {
                self.state = ControlState::Idle;
            }
            return Some(v);
        }
        self.index_of(offset).map(|i| self.values[i])
    }

    /// Bus write. `None` means no register at this offset; otherwise the
    /// outcome tells the fabric whether to run the model.
    pub fn bus_write(&mut self, offset: u32, value: u32) -> Option<WriteOutcome> {
        if offset == CTRL_OFFSET {
            // Only AP_START is host-writable; the rest is device-owned.
            if value & AP_START != 0 {
                return Some(if self.state == ControlState::Idle {
                    self.state = ControlState::Busy;
                    WriteOutcome::StartAccepted
                } else {
                    WriteOutcome::StartIgnored
                });
            }
            return Some(WriteOutcome::Ignored);
        }
        let i = self.index_of(offset)?;
        Some(match self.spec.registers[i].access {
            Access::ReadWrite => {
                self.values[i] = value;
                WriteOutcome::Stored
            }
            Access::ReadOnly => WriteOutcome::Ignored,
        })
    }

    /// Marks the synchronous run as finished; done stays latched until the
    /// host consumes it.
    pub fn complete_execution(&mut self) {
        debug_assert_eq!(self.state, ControlState::Busy);
        self.state = ControlState::DoneLatched;
    }

    /// Returns the core to idle and zeroes every read-write register; a
    /// pending done flag is discarded. Idempotent.
    pub fn reset(&mut self) {
        self.state = ControlState::Idle;
        for (i, reg) in self.spec.registers.iter().enumerate() {
            if reg.access == Access::ReadWrite {
                self.values[i] = 0;
            }
        }
    }
}

/// A deterministic behavioral model of a hardware block. `execute` sees a
/// snapshot of the register window and the fabric memory, performs the
/// block's work, and returns the cycle count to charge.
pub trait IpModel {
    fn name(&self) -> &str;
    fn register_spec(&self) -> RegisterSpec;
    fn execute(&self, regs: &RegisterFile, mem: &mut FabricMemory) -> u64;
}
