#include "cola/offload.hpp"

#include <algorithm>
#include <cstdlib>

#include "cola/checkpoint.hpp"

namespace cola {

const char* message_kind_name(MessageKind k) {
    switch (k) {
    case MessageKind::AdaptationData: return "adaptation_data";
    case MessageKind::FlushRequest: return "flush_request";
    case MessageKind::AdapterUpload: return "adapter_upload";
    case MessageKind::Ack: return "ack";
    }
    return "?";
}

std::unique_ptr<OffloadRuntime> OffloadRuntime::spawn(const OffloadOptions& options) {
    if (options.workers < 1) throw ConfigError("offload runtime needs at least one worker");
    return std::unique_ptr<OffloadRuntime>(new OffloadRuntime(options));
}

OffloadRuntime::OffloadRuntime(const OffloadOptions& options) : options_(options) {
    int n = options.workers;
    if (const char* cap = std::getenv("COLA_THREADS")) {
        const int c = std::atoi(cap);
        if (c >= 1) n = std::min(n, c);
    }
    for (int i = 0; i < n; ++i) {
        auto w = std::make_unique<Worker>();
        w->id = i;
        workers_.push_back(std::move(w));
    }
    if (!options_.message_log_path.empty()) {
        log_.open(options_.message_log_path);
        if (!log_) throw ConfigError("cannot open message log " + options_.message_log_path);
    }
    if (options_.mode == OffloadMode::Concurrent) {
        for (auto& w : workers_) {
            Worker* wp = w.get();
            wp->thread = std::thread([this, wp] { worker_loop(*wp); });
        }
    }
}

OffloadRuntime::~OffloadRuntime() {
    if (options_.mode == OffloadMode::Concurrent) {
        for (auto& w : workers_) {
            {
                std::lock_guard<std::mutex> lk(w->mu);
                w->stop = true;
            }
            w->cv.notify_all();
        }
        for (auto& w : workers_)
            if (w->thread.joinable()) w->thread.join();
    }
    // Account for records never consumed by a fit.
    std::lock_guard<std::mutex> lk(accounting_mu_);
    for (const auto& w : workers_)
        for (const auto& [mk, owned] : w->owned)
            accounting_.records_buffered += static_cast<long>(owned.buffer.size());
}

void OffloadRuntime::log_message(int worker_id, const Message& msg) {
    if (!log_.is_open()) return;
    std::lock_guard<std::mutex> lk(log_mu_);
    log_ << "{\"seq\":" << msg.seq << ",\"kind\":\"" << message_kind_name(msg.kind) << "\",\"worker\":"
         << worker_id << ",\"m\":" << msg.m << ",\"k\":" << msg.k << ",\"t\":" << msg.t
         << ",\"bytes\":" << (msg.payload.size() + msg.record.input.bytes().size() + msg.record.grad.bytes().size())
         << "}\n";
}

void OffloadRuntime::register_adapter(int m, int k, const Adapter& adapter) {
    const auto key = std::make_pair(m, k);
    if (owner_.count(key)) throw ConfigError("adapter already registered for this (m, k)");
    const int w = next_assign_++ % workers();
    owner_[key] = w;
    Owned owned;
    owned.adapter = adapter;
    workers_[static_cast<std::size_t>(w)]->owned.emplace(key, std::move(owned));
}

int OffloadRuntime::owner_of(int m, int k) const {
    const auto it = owner_.find({m, k});
    if (it == owner_.end()) throw ConfigError("no adapter registered for (m=" + std::to_string(m) +
                                              ", k=" + std::to_string(k) + ")");
    return it->second;
}

void OffloadRuntime::post(Worker& w, Message msg) {
    log_message(w.id, msg);
    {
        std::lock_guard<std::mutex> lk(accounting_mu_);
        ++accounting_.messages;
    }
    if (options_.mode == OffloadMode::Synchronous) {
        auto replies = handle(w, std::move(msg));
        for (auto& r : replies) {
            log_message(w.id, r);
            std::lock_guard<std::mutex> lk(accounting_mu_);
            ++accounting_.messages;
        }
        w.outbox.insert(w.outbox.end(), std::make_move_iterator(replies.begin()),
                        std::make_move_iterator(replies.end()));
    } else {
        std::lock_guard<std::mutex> lk(w.mu);
        w.inbox.push_back(std::move(msg));
        w.cv.notify_all();
    }
}

void OffloadRuntime::worker_loop(Worker& w) {
    for (;;) {
        Message msg;
        {
            std::unique_lock<std::mutex> lk(w.mu);
            w.cv.wait(lk, [&] { return w.stop || !w.inbox.empty(); });
            if (w.inbox.empty()) return; // stop requested and drained
            msg = std::move(w.inbox.front());
            w.inbox.pop_front();
        }
        if (options_.simulated_latency.count() > 0) std::this_thread::sleep_for(options_.simulated_latency);
        auto replies = handle(w, std::move(msg));
        if (!replies.empty()) {
            for (auto& r : replies) {
                log_message(w.id, r);
                std::lock_guard<std::mutex> lk(accounting_mu_);
                ++accounting_.messages;
            }
            std::lock_guard<std::mutex> lk(w.mu);
            w.outbox.insert(w.outbox.end(), std::make_move_iterator(replies.begin()),
                            std::make_move_iterator(replies.end()));
            w.cv.notify_all();
        }
    }
}

std::vector<OffloadRuntime::Message> OffloadRuntime::handle(Worker& w, Message msg) {
    std::vector<Message> replies;
    switch (msg.kind) {
    case MessageKind::AdaptationData: {
        const auto key = std::make_pair(msg.m, msg.k);
        auto it = w.owned.find(key);
        if (it == w.owned.end()) throw ConfigError("adaptation data for an adapter this worker does not own");
        it->second.buffer.push_back(std::move(msg.record));
        break;
    }
    case MessageKind::FlushRequest: {
        long fitted = 0;
        for (auto& [mk, owned] : w.owned) {
            if (owned.buffer.empty()) continue;
            auto [x, g] = stack_records(owned.buffer);
            fit_step(owned.adapter, x, g, options_.fit_optim, owned.opt, msg.lr);
            {
                std::lock_guard<std::mutex> lk(accounting_mu_);
                accounting_.records_consumed += static_cast<long>(owned.buffer.size());
                ++accounting_.fit_steps;
            }
            owned.buffer.clear(); // empty buffer after each adaptation
            ++fitted;
            Message up;
            up.kind = MessageKind::AdapterUpload;
            up.seq = msg.seq;
            up.m = mk.first;
            up.k = mk.second;
            up.t = msg.t;
            up.payload = adapter_to_bytes(owned.adapter);
            replies.push_back(std::move(up));
        }
        Message ack;
        ack.kind = MessageKind::Ack;
        ack.seq = msg.seq;
        ack.t = msg.t;
        ack.fitted = fitted;
        replies.push_back(std::move(ack));
        break;
    }
    default:
        throw ConfigError("unexpected message kind on worker inbox");
    }
    return replies;
}

void OffloadRuntime::dispatch(std::vector<AdaptationRecord> records) {
    for (auto& r : records) {
        const int w = owner_of(r.layer, r.user);
        Message msg;
        msg.kind = MessageKind::AdaptationData;
        msg.seq = ++seq_;
        msg.m = r.layer;
        msg.k = r.user;
        msg.t = r.iter;
        {
            std::lock_guard<std::mutex> lk(accounting_mu_);
            ++accounting_.records_dispatched;
            accounting_.samples_dispatched += static_cast<long>(r.input.rows());
        }
        msg.record = std::move(r);
        post(*workers_[static_cast<std::size_t>(w)], std::move(msg));
    }
}

std::vector<OffloadRuntime::Upload> OffloadRuntime::flush(long t, double lr) {
    for (auto& w : workers_) {
        Message msg;
        msg.kind = MessageKind::FlushRequest;
        msg.seq = ++seq_;
        msg.t = t;
        msg.lr = lr;
        post(*w, std::move(msg));
    }

    std::vector<Upload> uploads;
    long fitted_total = 0;
    for (auto& w : workers_) {
        std::vector<Message> replies;
        if (options_.mode == OffloadMode::Synchronous) {
            replies = std::move(w->outbox);
            w->outbox.clear();
        } else {
            std::unique_lock<std::mutex> lk(w->mu);
            const bool ok = w->cv.wait_for(lk, options_.flush_timeout, [&] {
                for (const auto& msg : w->outbox)
                    if (msg.kind == MessageKind::Ack && msg.t == t) return true;
                return false;
            });
            if (!ok)
                throw TimeoutError("offload worker " + std::to_string(w->id) + " missed the flush deadline (" +
                                   std::to_string(options_.flush_timeout.count()) + " ms)");
            replies = std::move(w->outbox);
            w->outbox.clear();
        }
        for (auto& msg : replies) {
            if (msg.kind == MessageKind::Ack)
                fitted_total += msg.fitted;
            else if (msg.kind == MessageKind::AdapterUpload)
                uploads.push_back({msg.m, msg.k, adapter_from_bytes(msg.payload)});
        }
    }
    if (fitted_total == 0) throw Error("flush with empty buffers (no adaptation data since last flush)");
    std::sort(uploads.begin(), uploads.end(), [](const Upload& a, const Upload& b) {
        return std::tie(a.m, a.k) < std::tie(b.m, b.k);
    });
    return uploads;
}

std::size_t OffloadRuntime::buffered_samples(int m, int k) const {
    const int w = owner_of(m, k);
    const auto& worker = *workers_[static_cast<std::size_t>(w)];
    // Synchronous mode only (no lock): callers in concurrent mode should not
    // inspect buffers between dispatch and ack.
    const auto it = worker.owned.find({m, k});
    if (it == worker.owned.end()) return 0;
    std::size_t total = 0;
    for (const auto& r : it->second.buffer) total += r.input.rows();
    return total;
}

OffloadRuntime::Accounting OffloadRuntime::accounting() const {
    std::lock_guard<std::mutex> lk(accounting_mu_);
    return accounting_;
}

} // namespace cola
