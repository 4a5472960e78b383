#include "dpaps/client.hpp"

#include <algorithm>

namespace dpaps {

bool Client::is_pending(const OpHandle& h) {
  std::lock_guard lock(h->m);
  return !h->done;
}

void Client::wait(const OpHandle& h) {
  hooks_.wait(h);
  std::erase(outstanding_, h);
}

void Client::track(const OpHandle& h) {
  if (!h->done) outstanding_.push_back(h);
}

std::vector<Value> Client::pull(const std::vector<Key>& keys) {
  OpHandle h = node_.submit_pull(worker_, keys);
  hooks_.after_submit();
  hooks_.wait(h);
  return std::move(h->results);
}

void Client::push(const std::vector<Key>& keys, std::vector<Value> updates) {
  OpHandle h = node_.submit_push(worker_, keys, std::move(updates));
  hooks_.after_submit();
  hooks_.wait(h);
}

void Client::localize(const std::vector<Key>& keys) {
  OpHandle h = node_.submit_localize(worker_, keys);
  hooks_.after_submit();
  hooks_.wait(h);
}

OpHandle Client::pull_async(const std::vector<Key>& keys) {
  OpHandle h = node_.submit_pull(worker_, keys);
  track(h);
  hooks_.after_submit();
  return h;
}

OpHandle Client::push_async(const std::vector<Key>& keys, std::vector<Value> updates) {
  OpHandle h = node_.submit_push(worker_, keys, std::move(updates));
  track(h);
  hooks_.after_submit();
  return h;
}

OpHandle Client::localize_async(const std::vector<Key>& keys) {
  OpHandle h = node_.submit_localize(worker_, keys);
  track(h);
  hooks_.after_submit();
  return h;
}

void Client::wait_all() {
  while (!outstanding_.empty()) {
    OpHandle h = outstanding_.back();
    outstanding_.pop_back();
    hooks_.wait(h);
  }
}

void Client::barrier() {
  wait_all();  // pre-barrier ops must be applied before any post-barrier op
  OpHandle h = node_.submit_barrier(worker_);
  hooks_.after_submit();
  hooks_.wait(h);
}

}  // namespace dpaps
