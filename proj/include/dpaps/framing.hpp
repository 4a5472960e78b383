#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "dpaps/core.hpp"

namespace dpaps {

// Length-prefixed little-endian wire format, bit-exact:
//   u32  total frame length (including this field)
//   u8   kind
//   u32  sender rank
//   u16  origin worker node rank, u16 origin worker local index
//   u64  op_id
//   u32  reply_to rank
//   u8   owner_hint_present, u32 owner_hint
//   u32  key count
//   u64  keys[key_count]
//   u8   payload_present
//   f64  payload[key_count * V]   (when present; V inferred from the length)
std::vector<std::uint8_t> frame(const Message& msg);

// Inverse of frame. Malformed input raises TransportError with the byte
// offset of the fault. `bytes` is one whole frame, length prefix included.
Message unframe(std::span<const std::uint8_t> bytes);

// Fixed byte overhead of a frame before the key array.
inline constexpr std::size_t kFrameHeaderBytes = 4 + 1 + 4 + 4 + 8 + 4 + 1 + 4 + 4;

}  // namespace dpaps
