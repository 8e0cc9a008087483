#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "cola/adapter.hpp"

namespace cola {

// Checkpoint byte format, little-endian throughout:
//   magic "COLA", version u32 (=1), tensor count u32, then per tensor
//   { name length u32, name bytes, dtype u8 (0=f32, 1=f64), ndim u32,
//     dims u64 each, raw element data }.
inline constexpr std::uint32_t kCheckpointVersion = 1;

// Adapters are stored as named tensors "m{m}.k{k}.{param}" plus a one-element
// f64 tensor "m{m}.k{k}.alpha" carrying the adapter scale. The adapter kind
// is recovered from its parameter set (A,B / W / W1,b1,W2,b2).
void save_checkpoint(const std::string& path, const std::vector<AdapterSet>& users);
std::vector<AdapterSet> load_checkpoint(const std::string& path);

// Same tensor records, in-memory, for shipping one adapter between devices.
std::vector<std::byte> adapter_to_bytes(const Adapter& adapter);
Adapter adapter_from_bytes(std::span<const std::byte> bytes);

} // namespace cola
