#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "pmsplan/loss.hpp"
#include "pmsplan/priors.hpp"
#include "pmsplan/supply_model.hpp"

namespace fixtures {

// Four test nodes, two supply nodes, every node at risk level 5.
inline pms::Network sixnode_network() {
    pms::Network net;
    net.test_nodes = {"TN1", "TN2", "TN3", "TN4"};
    net.supply_nodes = {"SN1", "SN2"};
    for (const auto& id : net.test_nodes) net.risk_levels[id] = 5;
    for (const auto& id : net.supply_nodes) net.risk_levels[id] = 5;
    net.validate();
    return net;
}

// Historical records: per (test node, supply node) pair, n tests with y
// positives, positives emitted first.
inline pms::Dataset dataset_from_counts(const std::vector<std::vector<long>>& n,
                                        const std::vector<std::vector<long>>& y,
                                        double sensitivity = 1.0, double specificity = 1.0) {
    pms::Dataset data;
    for (std::size_t a = 0; a < n.size(); ++a) {
        for (std::size_t b = 0; b < n[a].size(); ++b) {
            for (long k = 0; k < n[a][b]; ++k) {
                pms::TestRecord rec;
                rec.test_node = a;
                rec.supply_node = b;
                rec.result = k < y[a][b] ? 1 : 0;
                rec.sensitivity = sensitivity;
                rec.specificity = specificity;
                data.records.push_back(rec);
            }
        }
    }
    return data;
}

inline pms::Dataset sixnode_dataset() {
    return dataset_from_counts({{7, 5}, {0, 3}, {3, 4}, {8, 3}},
                               {{3, 1}, {0, 0}, {0, 0}, {2, 1}});
}

inline pms::LossSpec default_loss() {
    pms::LossSpec spec;
    spec.score_kind = pms::ScoreKind::assessment;
    spec.threshold_l = 0.2;
    spec.weight_slope_m = 0.6;
    spec.underestimation_v = 1.0;
    return spec;
}

// One test node, one supply node; handy for quadrature cross-checks.
inline pms::Network tiny_network() {
    pms::Network net;
    net.test_nodes = {"T"};
    net.supply_nodes = {"S"};
    net.risk_levels["T"] = 4;
    net.risk_levels["S"] = 4;
    net.validate();
    return net;
}

} // namespace fixtures
