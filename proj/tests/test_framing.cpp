#include <doctest.h>

#include <cstring>
#include <random>

#include "dpaps/framing.hpp"

using namespace dpaps;

namespace {

Message sample_pull_req() {
  Message m;
  m.kind = MsgKind::PullReq;
  m.sender = 2;
  m.origin_worker = {2, 1};
  m.op_id = 0x0102030405060708ull;
  m.reply_to = 2;
  m.keys = {42};
  return m;
}

}  // namespace

TEST_CASE("single-key pull request is 43 bytes with a pinned layout") {
  auto bytes = frame(sample_pull_req());
  REQUIRE(bytes.size() == 43);
  // length prefix, little-endian, includes itself
  CHECK(bytes[0] == 43);
  CHECK(bytes[1] == 0);
  CHECK(bytes[2] == 0);
  CHECK(bytes[3] == 0);
  CHECK(bytes[4] == 0);  // kind = PullReq
  CHECK(bytes[5] == 2);  // sender
  CHECK(bytes[9] == 2);   // origin worker node (u16)
  CHECK(bytes[11] == 1);  // origin worker local (u16)
  CHECK(bytes[13] == 0x08);  // op_id low byte
  CHECK(bytes[20] == 0x01);  // op_id high byte
  CHECK(bytes[21] == 2);     // reply_to
  CHECK(bytes[25] == 0);     // no owner hint
  CHECK(bytes[30] == 1);     // key count
  CHECK(bytes[34] == 42);    // key 0
  CHECK(bytes[42] == 0);     // no payload
}

TEST_CASE("push request payload bytes follow keys contiguously") {
  Message m;
  m.kind = MsgKind::PushReq;
  m.sender = 0;
  m.origin_worker = {0, 0};
  m.op_id = 7;
  m.keys = {3, 9};
  m.payload = {{1.0, 2.0, 3.0}, {4.0, 5.0, 6.0}};
  m.has_payload = true;
  auto bytes = frame(m);
  // 34 fixed + 2*8 keys + 1 payload flag + 2*3*8 payload
  REQUIRE(bytes.size() == 99);
  double d;
  std::memcpy(&d, bytes.data() + 51, 8);
  CHECK(d == 1.0);
  std::memcpy(&d, bytes.data() + 91, 8);
  CHECK(d == 6.0);
}

TEST_CASE("owner hint survives the roundtrip") {
  Message m = sample_pull_req();
  m.kind = MsgKind::PullResp;
  m.owner_hint = 3;
  m.payload = {{1.25}};
  m.has_payload = true;
  Message back = unframe(frame(m));
  CHECK(back == m);
}

TEST_CASE("randomized roundtrip over every message kind") {
  std::mt19937_64 gen(0xF00D);
  std::uniform_real_distribution<double> val(-1e6, 1e6);
  for (int iter = 0; iter < 10000; ++iter) {
    Message m;
    m.kind = static_cast<MsgKind>(gen() % 10);
    m.sender = std::uint32_t(gen() % 64);
    m.origin_worker = {std::uint32_t(gen() % 64), std::uint32_t(gen() % 16)};
    m.op_id = gen();
    m.reply_to = std::uint32_t(gen() % 64);
    if (gen() % 2) m.owner_hint = std::uint32_t(gen() % 64);
    const std::size_t nk = gen() % 5;
    for (std::size_t i = 0; i < nk; ++i) m.keys.push_back(gen());
    if (nk > 0 && gen() % 2) {
      m.has_payload = true;
      const std::size_t vl = 1 + gen() % 4;
      for (std::size_t i = 0; i < nk; ++i) {
        Value v(vl);
        for (auto& x : v) x = val(gen);
        m.payload.push_back(v);
      }
    }
    Message back = unframe(frame(m));
    REQUIRE(back == m);
  }
}

TEST_CASE("malformed frames are rejected with diagnostics") {
  auto bytes = frame(sample_pull_req());

  SUBCASE("truncated") {
    auto cut = bytes;
    cut.resize(20);
    cut[0] = 20;  // keep the length honest so the cut itself is detected
    CHECK_THROWS_AS(unframe(cut), TransportError);
  }
  SUBCASE("length field disagrees with frame size") {
    auto bad = bytes;
    bad[0] = 41;
    CHECK_THROWS_AS(unframe(bad), TransportError);
  }
  SUBCASE("unknown message kind") {
    auto bad = bytes;
    bad[4] = 99;
    CHECK_THROWS_AS(unframe(bad), TransportError);
  }
  SUBCASE("trailing bytes") {
    auto bad = bytes;
    bad.push_back(0);
    bad[0] = std::uint8_t(bad.size());
    CHECK_THROWS_AS(unframe(bad), TransportError);
  }
  SUBCASE("payload not divisible over keys") {
    Message m = sample_pull_req();
    m.has_payload = true;
    m.payload = {{1.0}};
    auto good = frame(m);
    auto bad = good;
    bad.resize(bad.size() - 4);  // chop half a double
    std::uint32_t len = std::uint32_t(bad.size());
    std::memcpy(bad.data(), &len, 4);
    CHECK_THROWS_AS(unframe(bad), TransportError);
  }
}
