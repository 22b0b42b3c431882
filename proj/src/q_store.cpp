#include "guibee/q_store.hpp"

#include <algorithm>
#include <cmath>

#include "guibee/errors.hpp"

namespace guibee {

namespace {
constexpr double kMinQ = 1e-9;
}

std::string to_string(Outcome o) {
    switch (o) {
        case Outcome::NewScreen: return "new";
        case Outcome::SeenScreen: return "seen";
        case Outcome::SameScreen: return "same";
    }
    return "?";
}

Outcome outcome_from_string(const std::string& s) {
    if (s == "new") return Outcome::NewScreen;
    if (s == "seen") return Outcome::SeenScreen;
    if (s == "same") return Outcome::SameScreen;
    throw Error("unknown outcome: " + s);
}

QTable::QTable(QTableConfig cfg) : cfg_(cfg) {
    if (!(cfg_.gamma_max > cfg_.gamma_med && cfg_.gamma_med > cfg_.gamma_low))
        throw Error("QTable: gamma_max > gamma_med > gamma_low required");
    if (!(cfg_.default_q > 0.0)) throw Error("QTable: default_q must be positive");
}

double QTable::get_q(const std::string& key) const {
    auto it = values_.find(key);
    return it == values_.end() ? cfg_.default_q : it->second;
}

double QTable::q_next_mean(const std::vector<std::string>& next_candidates) const {
    if (next_candidates.empty()) return cfg_.default_q;
    double sum = 0.0;
    for (const auto& k : next_candidates) sum += get_q(k);
    return sum / static_cast<double>(next_candidates.size());
}

double QTable::update_q(const std::string& key, Outcome outcome, double q_next) {
    if (!std::isfinite(q_next)) throw NumericDomainError("update_q: q_next must be finite");
    double v = 0.0;
    switch (outcome) {
        case Outcome::NewScreen: v = cfg_.gamma_max * q_next; break;
        case Outcome::SeenScreen: v = cfg_.gamma_med * q_next; break;
        case Outcome::SameScreen: v = cfg_.gamma_low * get_q(key); break;
    }
    v = std::clamp(v, kMinQ, cfg_.default_q);
    values_[key] = v;
    return v;
}

std::vector<std::string> weighted_sample(const std::vector<std::string>& candidates,
                                         const QTable& table, std::size_t H, Rng& rng) {
    if (candidates.empty()) return {};
    if (candidates.size() <= H) return candidates;

    std::vector<std::string> remaining = candidates;
    std::vector<double> weights;
    weights.reserve(remaining.size());
    for (const auto& k : remaining) weights.push_back(std::max(table.get_q(k), 1e-9));

    std::vector<std::string> picked;
    picked.reserve(H);
    while (picked.size() < H && !remaining.empty()) {
        double total = 0.0;
        for (double w : weights) total += w;
        const double u = rng.uniform_unit() * total;
        double cum = 0.0;
        std::size_t chosen = remaining.size() - 1;
        for (std::size_t i = 0; i < remaining.size(); ++i) {
            cum += weights[i];
            if (u < cum) {
                chosen = i;
                break;
            }
        }
        picked.push_back(remaining[chosen]);
        remaining.erase(remaining.begin() + static_cast<long>(chosen));
        weights.erase(weights.begin() + static_cast<long>(chosen));
    }
    return picked;
}

}  // namespace guibee
