#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <thread>
#include <vector>

#include "cola/adapter.hpp"
#include "cola/records.hpp"

namespace cola {

enum class OffloadMode : std::uint8_t { Synchronous, Concurrent };

enum class MessageKind : std::uint8_t { AdaptationData, FlushRequest, AdapterUpload, Ack };
const char* message_kind_name(MessageKind k);

struct OffloadOptions {
    int workers = 1;
    OffloadMode mode = OffloadMode::Synchronous;
    OptimSpec fit_optim;
    std::chrono::milliseconds flush_timeout{30000};
    // Per-message processing delay, to simulate slow devices.
    std::chrono::milliseconds simulated_latency{0};
    // When non-empty, every message is logged there as one JSON object per
    // line: {seq, kind, m, k, t, bytes}.
    std::string message_log_path;
};

// Simulated low-cost devices. Each worker exclusively owns a set of (m, k)
// adapters together with their optimizer state and record buffers; the
// trainer talks to workers only through FIFO messages. Synchronous mode runs
// the workers inline (deterministic); concurrent mode runs one thread per
// worker with a barrier at each flush.
class OffloadRuntime {
public:
    struct Upload {
        int m = -1;
        int k = -1;
        Adapter adapter;
    };

    struct Accounting {
        long records_dispatched = 0; // record blocks sent
        long samples_dispatched = 0; // rows sent
        long records_consumed = 0;   // record blocks consumed by fits
        long records_buffered = 0;   // blocks still buffered at shutdown
        long fit_steps = 0;
        long messages = 0;
    };

    // Adapters are assigned to workers round-robin in registration order.
    // The worker count is capped by the COLA_THREADS environment variable
    // when it is set.
    static std::unique_ptr<OffloadRuntime> spawn(const OffloadOptions& options);
    ~OffloadRuntime();

    OffloadRuntime(const OffloadRuntime&) = delete;
    OffloadRuntime& operator=(const OffloadRuntime&) = delete;

    int workers() const { return static_cast<int>(workers_.size()); }
    void register_adapter(int m, int k, const Adapter& adapter);
    int owner_of(int m, int k) const;

    // Appends each record to its (m, k) buffer on the owning worker.
    void dispatch(std::vector<AdaptationRecord> records);

    // Fits every non-empty buffer with learning rate lr, empties the buffers
    // and returns the refreshed adapters (sorted by (m, k)). Throws if no
    // records were buffered anywhere, and TimeoutError if a worker misses
    // the flush deadline in concurrent mode.
    std::vector<Upload> flush(long t, double lr);

    // Buffered sample count for one adapter (0 if unknown).
    std::size_t buffered_samples(int m, int k) const;

    Accounting accounting() const;

private:
    struct Owned {
        Adapter adapter;
        OptimState opt;
        std::vector<AdaptationRecord> buffer;
    };

    struct Message {
        MessageKind kind;
        long seq = 0;
        int m = -1;
        int k = -1;
        long t = 0;
        double lr = 0.0;
        AdaptationRecord record;
        std::vector<std::byte> payload;
        long fitted = 0;
    };

    struct Worker {
        int id = 0;
        std::map<std::pair<int, int>, Owned> owned;
        std::thread thread;
        std::mutex mu;
        std::condition_variable cv;
        std::deque<Message> inbox;
        std::vector<Message> outbox;
        bool stop = false;
    };

    explicit OffloadRuntime(const OffloadOptions& options);
    void worker_loop(Worker& w);
    // Handles one message on the worker side; returns produced replies.
    std::vector<Message> handle(Worker& w, Message msg);
    void post(Worker& w, Message msg);
    void log_message(int worker_id, const Message& msg);

    OffloadOptions options_;
    std::vector<std::unique_ptr<Worker>> workers_;
    std::map<std::pair<int, int>, int> owner_;
    int next_assign_ = 0;
    long seq_ = 0;
    mutable std::mutex accounting_mu_;
    Accounting accounting_;
    std::ofstream log_;
    std::mutex log_mu_;
};

} // namespace cola
