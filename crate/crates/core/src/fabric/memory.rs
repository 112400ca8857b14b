//! The fabric-side memory arena: a flat byte array with a first-fit,
//! 64-byte-aligned block allocator.

use super::FabricError;

/// Block alignment and size granule.
pub const MEM_ALIGN: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Block {
    offset: usize,
    len: usize,
    free: bool,
}

#[derive(Debug, Clone)]
pub struct FabricMemory {
    bytes: Vec<u8>,
    /// Ordered, contiguous cover of the arena.
    blocks: Vec<Block>,
}

impl FabricMemory {
    pub fn new(size: usize) -> Self {
        Self {
            bytes: vec![0; size],
            blocks: vec![Block {
                offset: 0,
                len: size,
                free: true,
            }],
        }
    }

    pub fn size(&self) -> usize {
        self.bytes.len()
    }

    /// First-fit allocation; the returned offset and the reserved length
    /// are 64-byte aligned.
    pub fn alloc(&mut self, size: usize) -> Result<u32, FabricError> {
        if size == 0 {
            return Err(FabricError::OutOfFabricMemory { requested: 0 });
        }
        let need = size.div_ceil(MEM_ALIGN) * MEM_ALIGN;
        let idx = self
            .blocks
            .iter()
            .position(|b| b.free && b.len >= need)
            .ok_or(FabricError::OutOfFabricMemory { requested: size })?;

        let block = self.blocks[idx];
        if block.len > need {
            self.blocks[idx].len = need;
            self.blocks.insert(
                idx + 1,
                Block {
                    offset: block.offset + need,
                    len: block.len - need,
                    free: true,
                },
            );
        }
        self.blocks[idx].free = false;
        Ok(block.offset as u32)
    }

    /// Frees a block previously returned by [`alloc`](Self::alloc) and
    /// coalesces it with free neighbors.
    pub fn free(&mut self, offset: u32) -> Result<(), FabricError> {
        let idx = self
            .blocks
            .iter()
            .position(|b| b.offset == offset as usize && !b.free)
            .ok_or(FabricError::BadFree { offset })?;
        self.blocks[idx].free = true;
        if idx + 1 < self.blocks.len() && self.blocks[idx + 1].free {
            self.blocks[idx].len += self.blocks[idx + 1].len;
            self.blocks.remove(idx + 1);
        }
        if idx > 0 && self.blocks[idx - 1].free {
            self.blocks[idx - 1].len += self.blocks[idx].len;
            self.blocks.remove(idx);
        }
        Ok(())
    }

    /// Offsets and lengths of the live (allocated) blocks, in address order.
    pub fn allocated_blocks(&self) -> Vec<(usize, usize)> {
        self.blocks
            .iter()
            .filter(|b| !b.free)
            .map(|b| (b.offset, b.len))
            .collect()
    }

    fn check_range(&self, offset: u32, len: usize) -> Result<(), FabricError> {
        let end = offset as u64 + len as u64;
        if end > self.bytes.len() as u64 {
            // Arena-relative address; the bus layer reports absolute ones.
            return Err(FabricError::BusError { addr: offset });
        }
        Ok(())
    }

    pub fn read(&self, offset: u32, out: &mut [u8]) -> Result<(), FabricError> {
        self.check_range(offset, out.len())?;
        out.copy_from_slice(&self.bytes[offset as usize..offset as usize + out.len()]);
        Ok(())
    }

    pub fn write(&mut self, offset: u32, data: &[u8]) -> Result<(), FabricError> {
        self.check_range(offset, data.len())?;
        self.bytes[offset as usize..offset as usize + data.len()].copy_from_slice(data);
        Ok(())
    }

    pub fn read_u32(&self, offset: u32) -> Result<u32, FabricError> {
        let mut buf = [0u8; 4];
        self.read(offset, &mut buf)?;
        Ok(u32::from_le_bytes(buf))
    }

    pub fn write_u32(&mut self, offset: u32, value: u32) -> Result<(), FabricError> {
        self.write(offset, &value.to_le_bytes())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn first_fit_from_empty_starts_at_zero() {
        let mut mem = FabricMemory::new(1 << 20);
        assert_eq!(mem.alloc(1 << 20).unwrap(), 0);
    }

    #[test]
    fn alignment_rounds_up() {
        let mut mem = FabricMemory::new(4096);
        assert_eq!(mem.alloc(100).unwrap(), 0);
        assert_eq!(mem.alloc(100).unwrap(), 128);
    }

    #[test]
    fn exhaustion() {
        let mut mem = FabricMemory::new(256);
        assert_eq!(
            mem.alloc(257),
            Err(FabricError::OutOfFabricMemory { requested: 257 })
        );
        assert!(mem.alloc(0).is_err());
    }

    #[test]
    fn free_then_realloc_reuses_the_offset() {
        let mut mem = FabricMemory::new(4096);
        let a = mem.alloc(200).unwrap();
        let _b = mem.alloc(200).unwrap();
        mem.free(a).unwrap();
        assert_eq!(mem.alloc(200).unwrap(), a);
    }

    #[test]
    fn bad_frees() {
        let mut mem = FabricMemory::new(4096);
        assert_eq!(mem.free(12345), Err(FabricError::BadFree { offset: 12345 }));
        let a = mem.alloc(64).unwrap();
        mem.free(a).unwrap();
        assert_eq!(mem.free(a), Err(FabricError::BadFree { offset: a }));
    }

    #[test]
    fn coalescing_restores_one_arena() {
        let mut mem = FabricMemory::new(1024);
        let a = mem.alloc(128).unwrap();
        let b = mem.alloc(128).unwrap();
        let c = mem.alloc(128).unwrap();
        mem.free(b).unwrap();
        mem.free(a).unwrap();
        mem.free(c).unwrap();
        assert_eq!(mem.alloc(1024).unwrap(), 0);
    }

    #[test]
    fn copy_roundtrip_and_range_checks() {
        let mut mem = FabricMemory::new(256);
        let data: Vec<u8> = (0..100).collect();
        mem.write(10, &data).unwrap();
        let mut back = vec![0u8; 100];
        mem.read(10, &mut back).unwrap();
        assert_eq!(back, data);
        assert!(matches!(
            mem.write(255, &[1, 2]),
            Err(FabricError::BusError { .. })
        ));
    }

    proptest! {
        /// After any interleaving of alloc/free, live blocks are pairwise
        /// disjoint, aligned, and within the arena.
        #[test]
        fn allocator_soundness(ops in proptest::collection::vec((any::<bool>(), 1usize..4096), 1..120)) {
            let mut mem = FabricMemory::new(1 << 16);
            let mut live: Vec<u32> = Vec::new();
            for (is_alloc, n) in ops {
                if is_alloc {
                    if let Ok(off) = mem.alloc(n) {
                        live.push(off);
                    }
                } else if !live.is_empty() {
                    let off = live.remove(n % live.len());
                    prop_assert!(mem.free(off).is_ok());
                }
            }
            let blocks = mem.allocated_blocks();
            let mut end = 0usize;
            let mut total = 0usize;
            for (off, len) in blocks {
                prop_assert_eq!(off % MEM_ALIGN, 0);
                prop_assert!(off >= end, "blocks overlap");
                end = off + len;
                total += len;
            }
            prop_assert!(end <= mem.size());
            prop_assert!(total <= mem.size());
        }
    }
}
