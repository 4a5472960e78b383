#include "dpaps/framing.hpp"

#include <cstring>

namespace dpaps {

namespace {

template <typename T>
void put(std::vector<std::uint8_t>& out, T v) {
  // Little-endian host assumed (x86/aarch64); memcpy keeps it alias-safe.
  const std::size_t at = out.size();
  out.resize(at + sizeof(T));
  std::memcpy(out.data() + at, &v, sizeof(T));
}

struct Reader {
  std::span<const std::uint8_t> bytes;
  std::size_t at = 0;

  template <typename T>
  T get() {
    if (at + sizeof(T) > bytes.size()) {
      throw TransportError("malformed frame: truncated at offset " + std::to_string(at));
    }
    T v;
    std::memcpy(&v, bytes.data() + at, sizeof(T));
    at += sizeof(T);
    return v;
  }
};

}  // namespace

std::vector<std::uint8_t> frame(const Message& msg) {
  std::vector<std::uint8_t> out;
  put<std::uint32_t>(out, 0);  // patched below
  put<std::uint8_t>(out, static_cast<std::uint8_t>(msg.kind));
  put<std::uint32_t>(out, msg.sender);
  put<std::uint16_t>(out, static_cast<std::uint16_t>(msg.origin_worker.node));
  put<std::uint16_t>(out, static_cast<std::uint16_t>(msg.origin_worker.local));
  put<std::uint64_t>(out, msg.op_id);
  put<std::uint32_t>(out, msg.reply_to);
  put<std::uint8_t>(out, msg.owner_hint ? 1 : 0);
  put<std::uint32_t>(out, msg.owner_hint.value_or(0));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(msg.keys.size()));
  for (Key k : msg.keys) put<std::uint64_t>(out, k);
  put<std::uint8_t>(out, msg.has_payload ? 1 : 0);
  if (msg.has_payload) {
    if (msg.payload.size() != msg.keys.size()) {
      throw TransportError("frame: payload not aligned with keys");
    }
    for (const Value& v : msg.payload) {
      for (double d : v) put<double>(out, d);
    }
  }
  const auto len = static_cast<std::uint32_t>(out.size());
  std::memcpy(out.data(), &len, sizeof(len));
  return out;
}

Message unframe(std::span<const std::uint8_t> bytes) {
  Reader r{bytes};
  const auto len = r.get<std::uint32_t>();
  if (len != bytes.size()) {
    throw TransportError("malformed frame: length field " + std::to_string(len) +
                         " != frame size " + std::to_string(bytes.size()));
  }
  Message msg;
  const auto kind = r.get<std::uint8_t>();
  if (kind > static_cast<std::uint8_t>(MsgKind::BarrierRelease)) {
    throw TransportError("malformed frame: unknown kind at offset 4");
  }
  msg.kind = static_cast<MsgKind>(kind);
  msg.sender = r.get<std::uint32_t>();
  msg.origin_worker.node = r.get<std::uint16_t>();
  msg.origin_worker.local = r.get<std::uint16_t>();
  msg.op_id = r.get<std::uint64_t>();
  msg.reply_to = r.get<std::uint32_t>();
  const bool has_hint = r.get<std::uint8_t>() != 0;
  const auto hint = r.get<std::uint32_t>();
  if (has_hint) msg.owner_hint = hint;
  const auto num_keys = r.get<std::uint32_t>();
  msg.keys.reserve(num_keys);
  for (std::uint32_t i = 0; i < num_keys; ++i) msg.keys.push_back(r.get<std::uint64_t>());
  msg.has_payload = r.get<std::uint8_t>() != 0;
  if (msg.has_payload) {
    const std::size_t rest = bytes.size() - r.at;
    if (num_keys == 0 || rest % (8 * num_keys) != 0) {
      throw TransportError("malformed frame: payload size " + std::to_string(rest) +
                           " not divisible over " + std::to_string(num_keys) + " keys");
    }
    const std::size_t value_len = rest / 8 / num_keys;
    msg.payload.resize(num_keys);
    for (auto& v : msg.payload) {
      v.reserve(value_len);
      for (std::size_t i = 0; i < value_len; ++i) v.push_back(r.get<double>());
    }
  }
  if (r.at != bytes.size()) {
    throw TransportError("malformed frame: trailing bytes at offset " + std::to_string(r.at));
  }
  return msg;
}

}  // namespace dpaps
