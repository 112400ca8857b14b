//! Behavioral simulator of an ARM+FPGA heterogeneous platform.
//!
//! The crate models the FPGA side ("fabric") as a decoded address space:
//! per-slot register windows at fixed bases plus a byte-addressed memory
//! region. IP cores are deterministic behavioral models mounted into slots
//! and driven through a start/done/idle control handshake. A host runtime
//! layers the usual accelerator API on top (configure, set parameters,
//! request memory, copy, start, wait, read back) and accounts simulated
//! time in a ledger instead of sleeping.
//!
//! The bundled IP is a fixed-point SURF interest-point detector (integral
//! image, box-filter Hessian scale space, 3x3x3 non-maximum suppression).
//! A double-precision host implementation of the same detector plus the
//! orientation/descriptor stage lives in [`surf::host`] and serves as the
//! differential reference for the fixed-point datapath.

pub mod fabric;
pub mod ipcore;
pub mod pattern;
pub mod runtime;
pub mod surf;
