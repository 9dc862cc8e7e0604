#pragma once

// Transition records, the line-oriented dataset format, replay buffers and
// batch sampling.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <ostream>
#include <string>
#include <vector>

#include "pars/error.hpp"
#include "pars/nn_core.hpp"
#include "pars/rng.hpp"
#include "pars/text_io.hpp"

namespace pars {

struct Transition {
    Vector s;
    Vector a;
    double r = 0.0;  // unscaled
    Vector s_next;
    bool done = false;
    bool truncated = false;  // episode cut by the horizon; s_next has no recorded successor action

    bool operator==(const Transition& o) const {
        return s == o.s && a == o.a && r == o.r && s_next == o.s_next && done == o.done && truncated == o.truncated;
    }
};

struct TransitionDataset {
    std::string env_id;
    int state_dim = 0;
    int action_dim = 0;
    Vector feasible_low;
    Vector feasible_high;
    std::vector<Transition> transitions;

    std::size_t size() const { return transitions.size(); }
    const Transition& operator[](std::size_t i) const { return transitions[i]; }
    bool operator==(const TransitionDataset&) const = default;
};

/// Fixed-capacity FIFO ring of transitions.
class ReplayBuffer {
public:
    explicit ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
        if (capacity == 0) throw InvalidArgument("ReplayBuffer: capacity must be positive");
        items_.reserve(capacity < 4096 ? capacity : 4096);
    }

    void add(Transition t) {
        if (items_.size() < capacity_) {
            items_.push_back(std::move(t));
        } else {
            items_[static_cast<std::size_t>(inserted_ % capacity_)] = std::move(t);
        }
        ++inserted_;
    }

    std::size_t size() const { return items_.size(); }
    std::size_t capacity() const { return capacity_; }
    std::uint64_t insertion_count() const { return inserted_; }
    bool empty() const { return items_.empty(); }

    /// Storage slot i (not insertion order once the ring has wrapped).
    const Transition& operator[](std::size_t i) const { return items_[i]; }

    /// Oldest-to-newest view of the contents.
    std::vector<Transition> in_order() const {
        std::vector<Transition> out;
        out.reserve(items_.size());
        const std::size_t start = items_.size() < capacity_ ? 0 : static_cast<std::size_t>(inserted_ % capacity_);
        for (std::size_t k = 0; k < items_.size(); ++k) out.push_back(items_[(start + k) % items_.size()]);
        return out;
    }

private:
    std::size_t capacity_;
    std::uint64_t inserted_ = 0;
    std::vector<Transition> items_;
};

// ---------------------------------------------------------------------------
// Persistence
//
// Header:      pars-dataset 1 <env_id> <state_dim> <action_dim> <low_1..low_n> <high_1..high_n>
// Transition:  <s...> <a...> <r> <s_next...> <done 0|1> <truncated 0|1>
// Fields are separated by single spaces; reals use shortest round-trip form.

inline void write_dataset(std::ostream& os, const TransitionDataset& ds) {
    os << "pars-dataset 1 " << ds.env_id << ' ' << ds.state_dim << ' ' << ds.action_dim;
    for (Eigen::Index k = 0; k < ds.feasible_low.size(); ++k) os << ' ' << format_real(ds.feasible_low[k]);
    for (Eigen::Index k = 0; k < ds.feasible_high.size(); ++k) os << ' ' << format_real(ds.feasible_high[k]);
    os << '\n';
    std::string line;
    for (const auto& t : ds.transitions) {
        line.clear();
        auto put = [&](double v) {
            if (!line.empty()) line += ' ';
            line += format_real(v);
        };
        for (Eigen::Index k = 0; k < t.s.size(); ++k) put(t.s[k]);
        for (Eigen::Index k = 0; k < t.a.size(); ++k) put(t.a[k]);
        put(t.r);
        for (Eigen::Index k = 0; k < t.s_next.size(); ++k) put(t.s_next[k]);
        line += t.done ? " 1" : " 0";
        line += t.truncated ? " 1" : " 0";
        os << line << '\n';
    }
}

inline TransitionDataset read_dataset(std::istream& is) {
    LineReader in(is);
    TransitionDataset ds;
    std::string line;
    if (!in.next(line)) throw ParseError(1, "empty file, expected dataset header");
    const auto head = split_ws(line);
    if (head.size() < 5 || head[0] != "pars-dataset" || head[1] != "1")
        throw ParseError(1, "expected header 'pars-dataset 1 <env_id> <state_dim> <action_dim> ...'");
    ds.env_id = std::string(head[2]);
    ds.state_dim = static_cast<int>(parse_int(head[3], 1));
    ds.action_dim = static_cast<int>(parse_int(head[4], 1));
    if (ds.state_dim < 1 || ds.action_dim < 1) throw SchemaError(1, "dimensions must be positive");
    const auto na = static_cast<std::size_t>(ds.action_dim);
    if (head.size() != 5 + 2 * na) throw SchemaError(1, "header bounds do not match action_dim");
    ds.feasible_low.resize(ds.action_dim);
    ds.feasible_high.resize(ds.action_dim);
    for (std::size_t k = 0; k < na; ++k) {
        ds.feasible_low[static_cast<Eigen::Index>(k)] = parse_real(head[5 + k], 1);
        ds.feasible_high[static_cast<Eigen::Index>(k)] = parse_real(head[5 + na + k], 1);
        if (!(ds.feasible_low[static_cast<Eigen::Index>(k)] < ds.feasible_high[static_cast<Eigen::Index>(k)]))
            throw SchemaError(1, "feasible_low must be below feasible_high");
    }
    const auto ns = static_cast<std::size_t>(ds.state_dim);
    const std::size_t expected = 2 * ns + na + 3;
    while (in.next(line)) {
        const std::size_t ln = in.line_no();
        const auto tok = split_ws(line);
        if (tok.empty()) continue;
        if (tok.size() != expected)
            throw SchemaError(ln, "expected " + std::to_string(expected) + " fields for state_dim "
                                      + std::to_string(ds.state_dim) + " and action_dim " + std::to_string(ds.action_dim)
                                      + ", got " + std::to_string(tok.size()));
        Transition t;
        t.s.resize(ds.state_dim);
        t.a.resize(ds.action_dim);
        t.s_next.resize(ds.state_dim);
        std::size_t i = 0;
        for (std::size_t k = 0; k < ns; ++k) t.s[static_cast<Eigen::Index>(k)] = parse_real(tok[i++], ln);
        for (std::size_t k = 0; k < na; ++k) t.a[static_cast<Eigen::Index>(k)] = parse_real(tok[i++], ln);
        t.r = parse_real(tok[i++], ln);
        for (std::size_t k = 0; k < ns; ++k) t.s_next[static_cast<Eigen::Index>(k)] = parse_real(tok[i++], ln);
        const auto flag = [&](std::string_view v) {
            if (v == "0") return false;
            if (v == "1") return true;
            throw ParseError(ln, "expected 0 or 1, got '" + std::string(v) + "'");
        };
        t.done = flag(tok[i++]);
        t.truncated = flag(tok[i++]);
        if (!std::isfinite(t.r)) throw SchemaError(ln, "reward must be finite");
        for (Eigen::Index k = 0; k < ds.action_dim; ++k)
            if (t.a[k] < ds.feasible_low[k] || t.a[k] > ds.feasible_high[k])
                throw SchemaError(ln, "action component outside the feasible box");
        ds.transitions.push_back(std::move(t));
    }
    return ds;
}

inline void save_dataset(const TransitionDataset& ds, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot open '" + path + "' for writing");
    write_dataset(os, ds);
    if (!os) throw IoError("write failed for '" + path + "'");
}

inline TransitionDataset load_dataset(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open '" + path + "' for reading");
    return read_dataset(is);
}

// ---------------------------------------------------------------------------
// Sampling

/// Column-major batch view used by the trainers.
struct Batch {
    Matrix s;       // state_dim x n
    Matrix a;       // action_dim x n
    Vector r;       // n
    Matrix s_next;  // state_dim x n
    Vector not_done;

    Eigen::Index size() const { return r.size(); }
};

inline Batch to_batch(const std::vector<Transition>& ts) {
    if (ts.empty()) throw InvalidArgument("to_batch: empty transition list");
    const auto n = static_cast<Eigen::Index>(ts.size());
    Batch b;
    b.s.resize(ts[0].s.size(), n);
    b.a.resize(ts[0].a.size(), n);
    b.s_next.resize(ts[0].s_next.size(), n);
    b.r.resize(n);
    b.not_done.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& t = ts[static_cast<std::size_t>(i)];
        b.s.col(i) = t.s;
        b.a.col(i) = t.a;
        b.s_next.col(i) = t.s_next;
        b.r[i] = t.r;
        b.not_done[i] = t.done ? 0.0 : 1.0;
    }
    return b;
}

/// Uniform sampling with replacement. `Source` needs size() and operator[].
template <class Source>
std::vector<Transition> sample_batch(const Source& src, std::size_t n, Rng& rng) {
    if (src.size() == 0) throw InvalidArgument("sample_batch: empty source");
    if (n == 0) throw InvalidArgument("sample_batch: n must be >= 1");
    std::vector<Transition> out;
    out.reserve(n);
    for (std::size_t k = 0; k < n; ++k) out.push_back(src[static_cast<std::size_t>(rng.index(src.size()))]);
    return out;
}

/// Number of offline samples in a mixed batch: n * fraction rounded to nearest.
inline std::size_t offline_count(std::size_t n, double offline_fraction) {
    return static_cast<std::size_t>(std::llround(static_cast<double>(n) * offline_fraction));
}

/// Offline draws first, then online draws; per-source counts are exact.
inline std::vector<Transition> mixed_sample(const TransitionDataset& offline, const ReplayBuffer& online,
                                            double offline_fraction, std::size_t n, Rng& rng) {
    if (offline_fraction < 0.0 || offline_fraction > 1.0)
        throw InvalidArgument("mixed_sample: offline_fraction must lie in [0, 1]");
    const std::size_t n_off = offline_count(n, offline_fraction);
    const std::size_t n_on = n - n_off;
    if (n_off > 0 && offline.size() == 0) throw InvalidArgument("mixed_sample: offline source is empty");
    if (n_on > 0 && online.empty()) throw InvalidArgument("mixed_sample: online source is empty");
    std::vector<Transition> out;
    out.reserve(n);
    if (n_off > 0) out = sample_batch(offline, n_off, rng);
    if (n_on > 0) {
        auto on = sample_batch(online, n_on, rng);
        for (auto& t : on) out.push_back(std::move(t));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Statistics

struct DatasetStats {
    std::size_t count = 0;
    double r_min = 0.0;
    double r_max = 0.0;
    double mean_action_norm = 0.0;  // mean ||a|| / max_possible_norm
    double max_possible_norm = 0.0;
};

/// Largest Euclidean norm attainable inside the feasible box.
inline double max_box_norm(const Vector& low, const Vector& high) {
    return low.cwiseAbs().cwiseMax(high.cwiseAbs()).norm();
}

inline DatasetStats dataset_stats(const TransitionDataset& ds) {
    if (ds.transitions.empty()) throw InvalidArgument("dataset_stats: empty dataset");
    DatasetStats st;
    st.count = ds.transitions.size();
    st.max_possible_norm = max_box_norm(ds.feasible_low, ds.feasible_high);
    st.r_min = ds.transitions.front().r;
    st.r_max = ds.transitions.front().r;
    double norm_sum = 0.0;
    for (const auto& t : ds.transitions) {
        st.r_min = std::min(st.r_min, t.r);
        st.r_max = std::max(st.r_max, t.r);
        norm_sum += t.a.norm();
    }
    st.mean_action_norm = norm_sum / static_cast<double>(st.count) / st.max_possible_norm;
    return st;
}

inline void write_stats_csv(std::ostream& os, const DatasetStats& st) {
    os << "metric,value\n";
    os << "count," << st.count << '\n';
    os << "r_min," << format_real(st.r_min) << '\n';
    os << "r_max," << format_real(st.r_max) << '\n';
    os << "mean_action_norm," << format_real(st.mean_action_norm) << '\n';
    os << "max_possible_norm," << format_real(st.max_possible_norm) << '\n';
}

}  // namespace pars
