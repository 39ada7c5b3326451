#ifndef GLUON_THREADS_HPP
#define GLUON_THREADS_HPP

#include <atomic>
#include <condition_variable>
#include <cstdlib>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

// Persistent worker pool with deterministic reductions.
//
// Reductions are computed per fixed-size block into a partials array and then
// combined by one thread in ascending block order, so the floating-point
// result is byte-identical no matter how many workers ran.  That property is
// load-bearing: report CSVs must not depend on --threads.
//
// Dispatch protocol: the caller waits until every worker is parked, installs
// the job and bumps the epoch, wakes everyone, joins the work itself, then
// waits for all workers to park again.  Workers can never leak from one job
// into the next, so the shared counters need no per-job generation tracking.

namespace gluon {

inline constexpr std::size_t kReduceBlock = 4096;

class ThreadPool {
  public:
    static ThreadPool& instance() {
        static ThreadPool pool;
        return pool;
    }

    int threads() const { return nthreads_; }

    void set_threads(int n) {
        if (n < 1) n = 1;
        if (n == nthreads_) return;
        shutdown();
        nthreads_ = n;
        start();
    }

    // f(begin, end) over [0, n) in contiguous kReduceBlock-sized chunks.
    // The calling thread participates.  Not reentrant.
    template <class F>
    void parallel_for(std::size_t n, F&& f) {
        if (n == 0) return;
        std::size_t nblocks = (n + kReduceBlock - 1) / kReduceBlock;
        run_blocks(nblocks, [&f, n](std::size_t block) {
            std::size_t b = block * kReduceBlock;
            std::size_t e = b + kReduceBlock;
            if (e > n) e = n;
            f(b, e);
        });
    }

    // Deterministic sum: per_block(begin, end) returns a partial; partials are
    // combined sequentially in ascending block order by the calling thread.
    template <class F>
    double reduce_sum(std::size_t n, F&& per_block) {
        if (n == 0) return 0.0;
        std::size_t nblocks = (n + kReduceBlock - 1) / kReduceBlock;
        partials_.assign(nblocks, 0.0);
        double* partials = partials_.data();
        run_blocks(nblocks, [&per_block, partials, n](std::size_t block) {
            std::size_t b = block * kReduceBlock;
            std::size_t e = b + kReduceBlock;
            if (e > n) e = n;
            partials[block] = per_block(b, e);
        });
        double acc = 0.0;
        for (std::size_t i = 0; i < nblocks; ++i) acc += partials_[i];
        return acc;
    }

    template <class F>
    double reduce_max(std::size_t n, F&& per_block, double init) {
        if (n == 0) return init;
        std::size_t nblocks = (n + kReduceBlock - 1) / kReduceBlock;
        partials_.assign(nblocks, init);
        double* partials = partials_.data();
        run_blocks(nblocks, [&per_block, partials, n](std::size_t block) {
            std::size_t b = block * kReduceBlock;
            std::size_t e = b + kReduceBlock;
            if (e > n) e = n;
            partials[block] = per_block(b, e);
        });
        double acc = init;
        for (std::size_t i = 0; i < nblocks; ++i)
            if (partials_[i] > acc) acc = partials_[i];
        return acc;
    }

    ~ThreadPool() { shutdown(); }

  private:
    ThreadPool() {
        nthreads_ = 1;
        if (const char* env = std::getenv("GLUON_THREADS")) {
            int n = std::atoi(env);
            if (n >= 1) nthreads_ = n;
        }
        start();
    }

    template <class F>
    void run_blocks(std::size_t nblocks, F&& per_block) {
        if (nthreads_ == 1 || nblocks < 2) {
            for (std::size_t i = 0; i < nblocks; ++i) per_block(i);
            return;
        }
        job_ = std::function<void(std::size_t)>(std::ref(per_block));
        {
            std::unique_lock<std::mutex> lk(mu_);
            parked_cv_.wait(lk, [this] { return parked_ == int(workers_.size()); });
            next_block_.store(0, std::memory_order_relaxed);
            blocks_total_ = nblocks;
            ++epoch_;
        }
        wake_cv_.notify_all();
        drain();
        std::unique_lock<std::mutex> lk(mu_);
        parked_cv_.wait(lk, [this] { return parked_ == int(workers_.size()); });
    }

    void drain() {
        for (;;) {
            std::size_t block = next_block_.fetch_add(1, std::memory_order_relaxed);
            if (block >= blocks_total_) return;
            job_(block);
        }
    }

    void worker_main() {
        std::uint64_t seen_epoch = 0;
        for (;;) {
            {
                std::unique_lock<std::mutex> lk(mu_);
                ++parked_;
                parked_cv_.notify_all();
                wake_cv_.wait(lk, [&] { return stop_ || epoch_ != seen_epoch; });
                --parked_;
                if (stop_) return;
                seen_epoch = epoch_;
            }
            drain();
        }
    }

    void start() {
        stop_ = false;
        parked_ = 0;
        for (int i = 1; i < nthreads_; ++i)
            workers_.emplace_back([this] { worker_main(); });
    }

    void shutdown() {
        {
            std::unique_lock<std::mutex> lk(mu_);
            stop_ = true;
        }
        wake_cv_.notify_all();
        for (auto& w : workers_) w.join();
        workers_.clear();
    }

    int nthreads_ = 1;
    std::vector<std::thread> workers_;
    std::function<void(std::size_t)> job_;
    std::atomic<std::size_t> next_block_{0};
    std::size_t blocks_total_ = 0;
    std::uint64_t epoch_ = 0;
    int parked_ = 0;
    bool stop_ = false;
    std::mutex mu_;
    std::condition_variable wake_cv_;
    std::condition_variable parked_cv_;
    std::vector<double> partials_;
};

template <class F>
inline void parallel_for(std::size_t n, F&& f) {
    ThreadPool::instance().parallel_for(n, std::forward<F>(f));
}

template <class F>
inline double reduce_sum(std::size_t n, F&& per_block) {
    return ThreadPool::instance().reduce_sum(n, std::forward<F>(per_block));
}

template <class F>
inline double reduce_max(std::size_t n, F&& per_block, double init) {
    return ThreadPool::instance().reduce_max(n, std::forward<F>(per_block), init);
}

inline void set_threads(int n) { ThreadPool::instance().set_threads(n); }

}  // namespace gluon

#endif
