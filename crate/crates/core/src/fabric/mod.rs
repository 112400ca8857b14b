//! The simulated FPGA side: an address-decoded set of per-slot register
//! windows, the fabric memory arena, and the simulated-time ledger.
//!
//! Addresses are fixed at construction so host programs never deal with
//! placement: slot `i` owns the 64 KiB register window at
//! `0x4000_0000 + i * 0x1_0000`, and fabric memory is byte-addressed from
//! `0x8000_0000`. Register transactions are atomic 32-bit words; memory
//! transactions are atomic whole-buffer copies with cycle-count
//! bookkeeping only (no signal-level bus modeling).

mod ledger;
mod memory;

pub use ledger::{EventKind, LedgerEntry, TimingBreakdown, TimingConfig, TimingLedger};
pub use memory::{FabricMemory, MEM_ALIGN};

use crate::ipcore::{ControlState, IpModel, RegisterFile, WriteOutcome};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FabricError {
    #[error("slot {0} out of range")]
    BadSlot(usize),
    #[error("slot {0} already occupied")]
    SlotOccupied(usize),
    #[error("register spec rejected: {0}")]
    BadRegisterSpec(String),
    #[error("bus error at {addr:#010x}")]
    BusError { addr: u32 },
    #[error("write to read-only register at {addr:#010x} ignored")]
    WriteIgnored { addr: u32 },
    #[error("start ignored: slot {slot} core is not idle")]
    StartIgnored { slot: usize },
    #[error("out of fabric memory (requested {requested} bytes)")]
    OutOfFabricMemory { requested: usize },
    #[error("bad free at offset {offset:#x}: not an allocated block")]
    BadFree { offset: u32 },
}

/// The fixed address plan. Two fabrics built with the same configuration
/// decode identically.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AddressMap {
    pub reg_base: u32,
    pub reg_stride: u32,
    pub max_slots: usize,
    pub mem_base: u32,
    pub mem_size: usize,
}

impl Default for AddressMap {
    fn default() -> Self {
        Self::new(256 << 20)
    }
}

/// Where a bus address lands.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decoded {
    Register { slot: usize, offset: u32 },
    Memory { offset: u32 },
}

impl AddressMap {
    pub fn new(mem_size: usize) -> Self {
        let map = Self {
            reg_base: 0x4000_0000,
            reg_stride: 0x1_0000,
            max_slots: 16,
            mem_base: 0x8000_0000,
            mem_size,
        };
        let reg_end = map.reg_base as u64 + map.max_slots as u64 * map.reg_stride as u64;
        let mem_end = map.mem_base as u64 + map.mem_size as u64;
        assert!(reg_end <= map.mem_base as u64, "register windows overlap memory");
        assert!(mem_end <= 1 << 32, "memory region exceeds the 32-bit bus");
        map
    }

    pub fn slot_base(&self, slot: usize) -> u32 {
        self.reg_base + slot as u32 * self.reg_stride
    }

    /// Pure address decode; `None` for unmapped addresses.
    pub fn decode(&self, addr: u32) -> Option<Decoded> {
        let a = addr as u64;
        let reg_end = self.reg_base as u64 + self.max_slots as u64 * self.reg_stride as u64;
        if a >= self.reg_base as u64 && a < reg_end {
            let rel = addr - self.reg_base;
            return Some(Decoded::Register {
                slot: (rel / self.reg_stride) as usize,
                offset: rel % self.reg_stride,
            });
        }
        let mem_end = self.mem_base as u64 + self.mem_size as u64;
        if a >= self.mem_base as u64 && a < mem_end {
            return Some(Decoded::Memory {
                offset: addr - self.mem_base,
            });
        }
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CopyDirection {
    HostToFabric,
    FabricToHost,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FabricConfig {
    pub mem_size: usize,
    pub timing: TimingConfig,
}

impl Default for FabricConfig {
    fn default() -> Self {
        Self {
            mem_size: 256 << 20,
            timing: TimingConfig::default(),
        }
    }
}

struct MountedIp {
    model: Box<dyn IpModel>,
    regs: RegisterFile,
}

/// The fabric instance: slots, memory, ledger. Confined to one logical
/// execution context; all operations are synchronous.
pub struct Fabric {
    map: AddressMap,
    slots: Vec<Option<MountedIp>>,
    memory: FabricMemory,
    ledger: TimingLedger,
}

impl Fabric {
    pub fn new(config: FabricConfig) -> Self {
        let map = AddressMap::new(config.mem_size);
        let mut slots = Vec::with_capacity(map.max_slots);
        slots.resize_with(map.max_slots, || None);
        Self {
            map,
            slots,
            memory: FabricMemory::new(config.mem_size),
            ledger: TimingLedger::new(config.timing),
        }
    }

    pub fn map(&self) -> &AddressMap {
        &self.map
    }

    pub fn ledger(&self) -> &TimingLedger {
        &self.ledger
    }

    pub fn memory(&self) -> &FabricMemory {
        &self.memory
    }

    pub fn memory_mut(&mut self) -> &mut FabricMemory {
        &mut self.memory
    }

    /// Charges one full-fabric configuration event.
    pub fn charge_config(&mut self, seconds: f64) {
        self.ledger.charge_config(seconds);
    }

    // ---- slots ----------------------------------------------------------

    /// Mounts an IP model at a slot and returns the window base address.
    /// Register accesses inside that window now route to the model's
    /// register file.
    pub fn mount_ip(&mut self, slot: usize, model: Box<dyn IpModel>) -> Result<u32, FabricError> {
        if slot >= self.map.max_slots {
            return Err(FabricError::BadSlot(slot));
        }
        if self.slots[slot].is_some() {
            return Err(FabricError::SlotOccupied(slot));
        }
        let spec = model.register_spec();
        spec.validate(self.map.reg_stride)
            .map_err(FabricError::BadRegisterSpec)?;
        self.slots[slot] = Some(MountedIp {
            regs: RegisterFile::new(spec),
            model,
        });
        Ok(self.map.slot_base(slot))
    }

    pub fn unmount_all(&mut self) {
        for slot in &mut self.slots {
            *slot = None;
        }
    }

    pub fn mounted_name(&self, slot: usize) -> Option<&str> {
        self.slots
            .get(slot)?
            .as_ref()
            .map(|ip| ip.model.name())
    }

    fn mounted(&self, slot: usize) -> Result<&MountedIp, FabricError> {
        if slot >= self.map.max_slots {
            return Err(FabricError::BadSlot(slot));
        }
        self.slots[slot].as_ref().ok_or(FabricError::BadSlot(slot))
    }

    // ---- register bus ---------------------------------------------------

    fn decode_register(&self, addr: u32) -> Result<(usize, u32), FabricError> {
        match self.map.decode(addr) {
            Some(Decoded::Register { slot, offset }) if addr % 4 == 0 => {
                if self.slots[slot].is_some() {
                    Ok((slot, offset))
                } else {
                    Err(FabricError::BusError { addr })
                }
            }
            _ => Err(FabricError::BusError { addr }),
        }
    }

    /// 32-bit register read. Reading a latched done flag through the
    /// control register consumes it.
    pub fn reg_read(&mut self, addr: u32) -> Result<u32, FabricError> {
        let (slot, offset) = self.decode_register(addr)?;
        self.slots[slot]
            .as_mut()
            .unwrap()
            .regs
            .bus_read(offset)
            .ok_or(FabricError::BusError { addr })
    }

    /// 32-bit register write. Writing AP_START from idle runs the model
    /// synchronously, charges its cycles, and latches done.
    pub fn reg_write(&mut self, addr: u32, value: u32) -> Result<(), FabricError> {
        let (slot, offset) = self.decode_register(addr)?;
        let mounted = self.slots[slot].as_mut().unwrap();
        match mounted.regs.bus_write(offset, value) {
            None => Err(FabricError::BusError { addr }),
            Some(WriteOutcome::Stored) => Ok(()),
            Some(WriteOutcome::Ignored) => {
                log::warn!("write of {value:#x} to read-only register {addr:#010x} ignored");
                Err(FabricError::WriteIgnored { addr })
            }
            Some(WriteOutcome::StartIgnored) => {
                log::warn!("start strobe ignored, slot {slot} core is not idle");
                Err(FabricError::StartIgnored { slot })
            }
            Some(WriteOutcome::StartAccepted) => {
                let cycles = mounted.model.execute(&mounted.regs, &mut self.memory);
                mounted.regs.complete_execution();
                self.ledger.charge_compute(cycles);
                Ok(())
            }
        }
    }

    /// Non-destructive done probe (does not clear the flag).
    pub fn poll_done(&self, slot: usize) -> Result<bool, FabricError> {
        Ok(self.mounted(slot)?.regs.poll_done())
    }

    pub fn control_state(&self, slot: usize) -> Result<ControlState, FabricError> {
        Ok(self.mounted(slot)?.regs.state())
    }

    /// Side-effect-free register value, bypassing clear-on-read.
    pub fn register_value(&self, slot: usize, offset: u32) -> Result<u32, FabricError> {
        self.mounted(slot)?
            .regs
            .value(offset)
            .ok_or(FabricError::BusError {
                addr: self.map.slot_base(slot) + offset,
            })
    }

    /// Returns the core to idle with zeroed read-write registers.
    pub fn reset_ip(&mut self, slot: usize) -> Result<(), FabricError> {
        if slot >= self.map.max_slots {
            return Err(FabricError::BadSlot(slot));
        }
        match self.slots[slot].as_mut() {
            Some(ip) => {
                ip.regs.reset();
                Ok(())
            }
            None => Err(FabricError::BadSlot(slot)),
        }
    }

    // ---- memory ---------------------------------------------------------

    pub fn mem_alloc(&mut self, size: usize) -> Result<u32, FabricError> {
        self.memory.alloc(size)
    }

    pub fn mem_free(&mut self, offset: u32) -> Result<(), FabricError> {
        self.memory.free(offset)
    }

    fn check_mem_range(&self, offset: u32, len: usize) -> Result<(), FabricError> {
        if offset as u64 + len as u64 > self.map.mem_size as u64 {
            return Err(FabricError::BusError {
                addr: self.map.mem_base.wrapping_add(offset),
            });
        }
        Ok(())
    }

    /// Host-to-fabric buffer copy; charges one TX event for the byte count.
    pub fn mem_copy_in(&mut self, offset: u32, data: &[u8]) -> Result<(), FabricError> {
        self.check_mem_range(offset, data.len())?;
        self.memory.write(offset, data)?;
        self.ledger.charge_transfer(EventKind::Tx, data.len() as u64);
        Ok(())
    }

    /// Fabric-to-host buffer copy; charges one RX event for the byte count.
    pub fn mem_copy_out(&mut self, offset: u32, out: &mut [u8]) -> Result<(), FabricError> {
        self.check_mem_range(offset, out.len())?;
        self.memory.read(offset, out)?;
        self.ledger.charge_transfer(EventKind::Rx, out.len() as u64);
        Ok(())
    }
}
