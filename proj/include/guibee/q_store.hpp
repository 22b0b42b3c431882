#pragma once

#include <map>
#include <string>
#include <vector>

#include "guibee/rng.hpp"

namespace guibee {

enum class Outcome { NewScreen, SeenScreen, SameScreen };

std::string to_string(Outcome o);
Outcome outcome_from_string(const std::string& s);

// Memory-based action-value store. Unseen actions read as default_q without
// being inserted; executed actions decay by outcome:
//   new screen   -> gamma_max * q_next
//   seen screen  -> gamma_med * q_next
//   same screen  -> gamma_low * previous value
struct QTableConfig {
    double default_q = 100.0;
    double gamma_max = 0.85;
    double gamma_med = 0.75;
    double gamma_low = 0.4;
};

class QTable {
public:
    explicit QTable(QTableConfig cfg = {});

    double get_q(const std::string& key) const;
    bool contains(const std::string& key) const { return values_.count(key) > 0; }

    // Mean get_q over the candidate keys; an empty candidate set (dead-end
    // screen) reads as default_q so the update rule stays total.
    double q_next_mean(const std::vector<std::string>& next_candidates) const;

    // Applies the outcome branch and stores the result. q_next must be
    // finite; it is ignored for SameScreen. Values are clamped to
    // [1e-9, default_q] so sampling weights stay positive.
    double update_q(const std::string& key, Outcome outcome, double q_next);

    std::size_t size() const { return values_.size(); }
    const QTableConfig& config() const { return cfg_; }
    // Sorted view for serialization.
    const std::map<std::string, double>& values() const { return values_; }
    void restore(const std::map<std::string, double>& values) { values_ = values; }

private:
    QTableConfig cfg_;
    std::map<std::string, double> values_;
};

// Samples up to H distinct keys, each draw weighted by the current Q-value.
// Candidate lists of size <= H come back whole, in input order.
std::vector<std::string> weighted_sample(const std::vector<std::string>& candidates,
                                         const QTable& table, std::size_t H, Rng& rng);

}  // namespace guibee
