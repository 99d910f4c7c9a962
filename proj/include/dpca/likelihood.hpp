#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "dpca/corpus.hpp"
#include "dpca/error.hpp"
#include "dpca/model.hpp"

namespace dpca {

/// ln p(counts | m, Omega) with the assignments summed out and no
/// multinomial coefficient: sum_b sum_j r_bj ln(sum_k m_k Omega^b_kj).
/// Returns -inf if an observed token has zero probability.
inline double document_log_likelihood(std::span<const SparseCounts> bags, std::span<const double> m,
                                      std::span<const BagModel> model_bags) {
    double total = 0.0;
    for (std::size_t b = 0; b < bags.size(); ++b) {
        const Matrix& omega = model_bags[b].omega;
        for (const auto& e : bags[b]) {
            double p = 0.0;
            for (std::size_t k = 0; k < m.size(); ++k) p += m[k] * omega(k, e.token);
            total += e.count * std::log(p);
        }
    }
    return total;
}

/// Sum of document_log_likelihood over the corpus. Throws NonFiniteError
/// when some observed token has zero probability.
inline double complete_data_log_likelihood(const Corpus& corpus, const std::vector<std::vector<double>>& m_all,
                                           std::span<const BagModel> model_bags) {
    if (m_all.size() != corpus.size()) throw ArgumentError("need one proportion vector per document");
    double total = 0.0;
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        const double ll = document_log_likelihood(corpus.documents[i].bags, m_all[i], model_bags);
        if (!std::isfinite(ll))
            throw NonFiniteError("log likelihood of document '" + corpus.documents[i].id + "' is not finite");
        total += ll;
    }
    return total;
}

}  // namespace dpca
