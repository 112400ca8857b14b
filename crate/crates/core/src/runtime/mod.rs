//! The host-side runtime API.
//!
//! A [`Platform`] owns one fabric instance and exposes the call surface a
//! host program uses to drive it: configure the fabric from a manifest,
//! set named algorithm parameters, request and release fabric memory, copy
//! buffers in both directions, and start/reset/wait on mounted cores.
//! Every call charges exactly the simulated-time events it would cost on
//! hardware and nothing else.

pub mod manifest;

pub use manifest::{IpManifest, ParamEncoding, DEFAULT_CONFIG_LATENCY_S};

use crate::fabric::{Fabric, FabricConfig, FabricError, TimingLedger};
use crate::ipcore::{ControlState, IpModel, CTRL_OFFSET};
use crate::surf::encoding::{decode_results, ERROR_SENTINEL, WORDS_PER_POINT};
use crate::surf::ip::SurfCore;
use crate::surf::{GrayImage, InterestPoint, SurfError, SurfParams};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RuntimeError {
    #[error("manifest file not found: {0}")]
    ConfigFileNotFound(PathBuf),
    #[error("bad manifest: {0}")]
    BadManifest(String),
    #[error("unknown parameter {0}")]
    UnknownParameter(String),
    #[error("ip {ip} is not idle")]
    Busy { ip: String },
    #[error("ip {ip} was never started")]
    NotRunning { ip: String },
    #[error("handle {ip} does not match the mounted fabric")]
    StaleHandle { ip: String },
    #[error("host buffer too small: needed {needed} elements, got {got}")]
    BufferMismatch { needed: usize, got: usize },
    #[error(transparent)]
    Fabric(#[from] FabricError),
    #[error(transparent)]
    Surf(#[from] SurfError),
}

/// Handle to one configured IP. Cheap to clone; validated against the
/// current mounts on every use.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IpHandle {
    pub name: String,
    pub slot: usize,
    pub base_addr: u32,
}

/// Handle to one allocated block of fabric memory.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MemHandle {
    pub offset: u32,
    pub len: usize,
}

/// One configured IP as reported back from `config`.
#[derive(Debug, Clone, PartialEq)]
pub struct IpInfo {
    pub name: String,
    pub slot: usize,
    pub base_addr: u32,
    /// parameter name -> (register offset, encoding)
    pub params: BTreeMap<String, (u32, ParamEncoding)>,
}

/// Everything the host needs to drive the configured fabric.
#[derive(Debug, Clone, PartialEq)]
pub struct AlgorithmInfo {
    /// Caller-chosen label for this configuration.
    pub lib_name: String,
    /// Name the manifest declares for itself.
    pub manifest_name: String,
    pub ips: Vec<IpInfo>,
}

impl AlgorithmInfo {
    pub fn handle(&self, ip_name: &str) -> Option<IpHandle> {
        self.ips.iter().find(|ip| ip.name == ip_name).map(|ip| IpHandle {
            name: ip.name.clone(),
            slot: ip.slot,
            base_addr: ip.base_addr,
        })
    }
}

type ModelFactory = Box<dyn Fn() -> Box<dyn IpModel>>;

struct SlotRuntime {
    name: String,
    params: BTreeMap<String, (u32, ParamEncoding)>,
}

/// One simulated platform instance: the fabric plus the model registry and
/// the parameter tables of whatever is currently configured.
pub struct Platform {
    fabric: Fabric,
    registry: BTreeMap<String, ModelFactory>,
    slots: Vec<Option<SlotRuntime>>,
}

impl Platform {
    pub fn new(config: FabricConfig) -> Self {
        let fabric = Fabric::new(config);
        let n = fabric.map().max_slots;
        let mut slots = Vec::with_capacity(n);
        slots.resize_with(n, || None);
        let mut platform = Self {
            fabric,
            registry: BTreeMap::new(),
            slots,
        };
        platform.register_model(crate::surf::ip::IP_NAME, || Box::new(SurfCore::new()));
        platform
    }

    /// Registers a behavioral model under a manifest-visible IP name.
    pub fn register_model(
        &mut self,
        name: &str,
        factory: impl Fn() -> Box<dyn IpModel> + 'static,
    ) {
        self.registry.insert(name.to_string(), Box::new(factory));
    }

    pub fn fabric(&self) -> &Fabric {
        &self.fabric
    }

    pub fn fabric_mut(&mut self) -> &mut Fabric {
        &mut self.fabric
    }

    pub fn ledger(&self) -> &TimingLedger {
        self.fabric.ledger()
    }

    // ---- configuration ----------------------------------------------------

    /// Configures the fabric from a manifest file: tears down the current
    /// mounts, mounts every declared IP at its slot, charges one
    /// configuration-latency event, and returns the handles.
    pub fn config(
        &mut self,
        lib_name: &str,
        manifest_path: &Path,
    ) -> Result<AlgorithmInfo, RuntimeError> {
        let manifest = IpManifest::load(manifest_path)?;
        self.config_from_manifest(lib_name, &manifest)
    }

    pub fn config_from_manifest(
        &mut self,
        lib_name: &str,
        manifest: &IpManifest,
    ) -> Result<AlgorithmInfo, RuntimeError> {
        // Validate against the registry before touching the fabric.
        for ip in &manifest.ips {
            let factory = self.registry.get(&ip.name).ok_or_else(|| {
                RuntimeError::BadManifest(format!("no behavioral model for ip {}", ip.name))
            })?;
            let model_spec = factory().register_spec();
            if model_spec != ip.register_spec() {
                return Err(RuntimeError::BadManifest(format!(
                    "ip {}: declared registers do not match the {} model",
                    ip.name, ip.name
                )));
            }
        }

        self.fabric.unmount_all();
        for s in &mut self.slots {
            *s = None;
        }

        let mut ips = Vec::new();
        for ip in &manifest.ips {
            let model = (self.registry[&ip.name])();
            let base_addr = match self.fabric.mount_ip(ip.slot, model) {
                Ok(base) => base,
                Err(e) => {
                    // a failed configuration leaves the fabric empty
                    self.fabric.unmount_all();
                    for s in &mut self.slots {
                        *s = None;
                    }
                    return Err(e.into());
                }
            };
            let params: BTreeMap<String, (u32, ParamEncoding)> = ip
                .params
                .iter()
                .map(|p| {
                    let reg = ip.registers.iter().find(|r| r.name == p.register).unwrap();
                    (p.name.clone(), (reg.offset, p.encoding))
                })
                .collect();
            self.slots[ip.slot] = Some(SlotRuntime {
                name: ip.name.clone(),
                params: params.clone(),
            });
            ips.push(IpInfo {
                name: ip.name.clone(),
                slot: ip.slot,
                base_addr,
                params,
            });
        }
        self.fabric.charge_config(manifest.config_latency_s);
        Ok(AlgorithmInfo {
            lib_name: lib_name.to_string(),
            manifest_name: manifest.lib_name.clone(),
            ips,
        })
    }

    fn slot_runtime(&self, handle: &IpHandle) -> Result<&SlotRuntime, RuntimeError> {
        self.slots
            .get(handle.slot)
            .and_then(|s| s.as_ref())
            .filter(|s| s.name == handle.name)
            .ok_or_else(|| RuntimeError::StaleHandle {
                ip: handle.name.clone(),
            })
    }

    // ---- parameters ---------------------------------------------------------

    /// Encodes `value` per the manifest and writes the mapped register.
    /// The IP must be idle.
    pub fn algorithm_set(
        &mut self,
        handle: &IpHandle,
        parameter: &str,
        value: f64,
    ) -> Result<(), RuntimeError> {
        let slot = self.slot_runtime(handle)?;
        let &(offset, encoding) = slot
            .params
            .get(parameter)
            .ok_or_else(|| RuntimeError::UnknownParameter(parameter.to_string()))?;
        if self.fabric.control_state(handle.slot)? != ControlState::Idle {
            return Err(RuntimeError::Busy {
                ip: handle.name.clone(),
            });
        }
        self.fabric
            .reg_write(handle.base_addr + offset, encoding.encode(value))?;
        Ok(())
    }

    // ---- memory -------------------------------------------------------------

    pub fn fpga_mem_request(&mut self, size: usize) -> Result<MemHandle, RuntimeError> {
        let offset = self.fabric.mem_alloc(size)?;
        Ok(MemHandle { offset, len: size })
    }

    pub fn fpga_mem_release(&mut self, handle: MemHandle) -> Result<(), RuntimeError> {
        self.fabric.mem_free(handle.offset)?;
        Ok(())
    }

    /// Packs 8-bit pixels one per little-endian 32-bit word (value in the
    /// low byte) and copies them into the destination block; charges one TX
    /// event of `4 * ncols * nrows` bytes.
    pub fn arm_tx(
        &mut self,
        host_source: &[u8],
        fabric_destination: &MemHandle,
        ncols: usize,
        nrows: usize,
    ) -> Result<(), RuntimeError> {
        let npix = ncols * nrows;
        if host_source.len() < npix {
            return Err(RuntimeError::BufferMismatch {
                needed: npix,
                got: host_source.len(),
            });
        }
        if fabric_destination.len < 4 * npix {
            return Err(FabricError::BusError {
                addr: self.fabric.map().mem_base + fabric_destination.offset,
            }
            .into());
        }
        let mut words = Vec::with_capacity(4 * npix);
        for &p in &host_source[..npix] {
            words.extend_from_slice(&(p as u32).to_le_bytes());
        }
        self.fabric.mem_copy_in(fabric_destination.offset, &words)?;
        Ok(())
    }

    /// Copies `ncols * nrows` raw little-endian words back to the host;
    /// charges one RX event. Results are not unpacked here; decoding is
    /// the caller's job.
    pub fn arm_rx(
        &mut self,
        host_destination: &mut [u32],
        fabric_source: &MemHandle,
        ncols: usize,
        nrows: usize,
    ) -> Result<(), RuntimeError> {
        let nwords = ncols * nrows;
        if host_destination.len() < nwords {
            return Err(RuntimeError::BufferMismatch {
                needed: nwords,
                got: host_destination.len(),
            });
        }
        if fabric_source.len < 4 * nwords {
            return Err(FabricError::BusError {
                addr: self.fabric.map().mem_base + fabric_source.offset,
            }
            .into());
        }
        let mut bytes = vec![0u8; 4 * nwords];
        self.fabric.mem_copy_out(fabric_source.offset, &mut bytes)?;
        for (dst, chunk) in host_destination[..nwords].iter_mut().zip(bytes.chunks_exact(4)) {
            *dst = u32::from_le_bytes(chunk.try_into().unwrap());
        }
        Ok(())
    }

    // ---- control --------------------------------------------------------

    /// Strobes AP_START; the model runs synchronously and its cycles are
    /// charged before this returns.
    pub fn start(&mut self, handle: &IpHandle) -> Result<(), RuntimeError> {
        self.slot_runtime(handle)?;
        self.fabric
            .reg_write(handle.base_addr + CTRL_OFFSET, crate::ipcore::AP_START)?;
        Ok(())
    }

    pub fn reset(&mut self, handle: &IpHandle) -> Result<(), RuntimeError> {
        self.slot_runtime(handle)?;
        self.fabric.reset_ip(handle.slot)?;
        Ok(())
    }

    /// Returns once the core has latched done and consumes the flag; the
    /// core is idle and restartable afterwards.
    pub fn wait_done(&mut self, handle: &IpHandle) -> Result<(), RuntimeError> {
        self.slot_runtime(handle)?;
        match self.fabric.control_state(handle.slot)? {
            ControlState::DoneLatched => {
                let _ = self.fabric.reg_read(handle.base_addr + CTRL_OFFSET)?;
                Ok(())
            }
            ControlState::Idle => Err(RuntimeError::NotRunning {
                ip: handle.name.clone(),
            }),
            // execution is synchronous inside start()
            ControlState::Busy => unreachable!("core observed busy between calls"),
        }
    }

    pub fn poll_done(&self, handle: &IpHandle) -> Result<bool, RuntimeError> {
        self.slot_runtime(handle)?;
        Ok(self.fabric.poll_done(handle.slot)?)
    }

    // ---- convenience wrapper ---------------------------------------------

    /// Runs the whole detection flow against a configured SURF IP: request
    /// buffers, ship the image, set the standard parameter table, start,
    /// wait, read back, decode, release.
    pub fn surf_detect(
        &mut self,
        handle: &IpHandle,
        image: &GrayImage,
        params: &SurfParams,
    ) -> Result<Vec<InterestPoint>, RuntimeError> {
        params.validate().map_err(RuntimeError::Surf)?;
        let npix = image.rows * image.cols;
        let max_points = image.rows.div_ceil(2)
            * image.cols.div_ceil(2)
            * (params.levels as usize - 2)
            * params.n_octaves as usize;
        let out_words = 1 + WORDS_PER_POINT * max_points;

        let input = self.fpga_mem_request(4 * npix)?;
        let output = match self.fpga_mem_request(4 * out_words) {
            Ok(h) => h,
            Err(e) => {
                let _ = self.fpga_mem_release(input);
                return Err(e);
            }
        };

        let result = self.surf_detect_inner(handle, image, params, &input, &output);
        let _ = self.fpga_mem_release(output);
        let _ = self.fpga_mem_release(input);
        result
    }

    fn surf_detect_inner(
        &mut self,
        handle: &IpHandle,
        image: &GrayImage,
        params: &SurfParams,
        input: &MemHandle,
        output: &MemHandle,
    ) -> Result<Vec<InterestPoint>, RuntimeError> {
        self.arm_tx(&image.pixels, input, image.cols, image.rows)?;
        self.algorithm_set(handle, "byte_rdoffset", input.offset as f64)?;
        self.algorithm_set(handle, "byte_wroffset", output.offset as f64)?;
        self.algorithm_set(handle, "rows", image.rows as f64)?;
        self.algorithm_set(handle, "cols", image.cols as f64)?;
        self.algorithm_set(handle, "MinHessian", params.min_hessian)?;
        self.algorithm_set(handle, "nOctaves", params.n_octaves as f64)?;
        self.algorithm_set(handle, "intervals", params.intervals as f64)?;
        self.algorithm_set(handle, "levels", params.levels as f64)?;
        self.start(handle)?;
        self.wait_done(handle)?;

        let mut count = [0u32; 1];
        self.arm_rx(&mut count, output, 1, 1)?;
        if count[0] == ERROR_SENTINEL {
            return Err(SurfError::ErrorSentinel.into());
        }
        let total_words = 1 + WORDS_PER_POINT * count[0] as usize;
        let mut words = vec![0u32; total_words];
        self.arm_rx(&mut words, output, total_words, 1)?;
        Ok(decode_results(&words)?)
    }
}
