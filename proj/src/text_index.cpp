#include "tinr/text_index.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>

namespace tinr {

std::vector<std::string> terms(std::string_view text) {
    std::vector<std::string> out;
    std::string current;
    for (char c : text) {
        const auto uc = static_cast<unsigned char>(c);
        if (uc < 0x80 && std::isalnum(uc)) {
            current.push_back(static_cast<char>(std::tolower(uc)));
        } else if (!current.empty()) {
            out.push_back(std::move(current));
            current.clear();
        }
    }
    if (!current.empty()) out.push_back(std::move(current));
    return out;
}

TermVector::TermVector(const std::vector<std::string>& tokens) {
    std::map<std::string, double> counts;
    for (const auto& t : tokens) counts[t] += 1.0;
    entries_.assign(counts.begin(), counts.end());
    double sq = 0.0;
    for (const auto& [term, tf] : entries_) sq += tf * tf;
    norm_ = std::sqrt(sq);
}

double cosine(const TermVector& a, const TermVector& b) {
    if (a.norm() == 0.0 || b.norm() == 0.0) return 0.0;
    const auto& x = a.entries();
    const auto& y = b.entries();
    double dot = 0.0;
    std::size_t i = 0, j = 0;
    while (i < x.size() && j < y.size()) {
        const int cmp = x[i].first.compare(y[j].first);
        if (cmp == 0) {
            dot += x[i].second * y[j].second;
            ++i;
            ++j;
        } else if (cmp < 0) {
            ++i;
        } else {
            ++j;
        }
    }
    return dot / (a.norm() * b.norm());
}

Bm25Index::Bm25Index(const std::vector<std::string>& documents, Bm25Params params) : params_(params) {
    std::map<std::string, std::vector<Posting>> postings;
    doc_lengths_.reserve(documents.size());
    double total = 0.0;
    for (std::size_t d = 0; d < documents.size(); ++d) {
        const auto tokens = terms(documents[d]);
        doc_lengths_.push_back(static_cast<double>(tokens.size()));
        total += static_cast<double>(tokens.size());
        std::map<std::string, double> tf;
        for (const auto& t : tokens) tf[t] += 1.0;
        for (const auto& [term, count] : tf) postings[term].push_back({d, count});
    }
    avg_length_ = documents.empty() ? 0.0 : total / static_cast<double>(documents.size());
    postings_.assign(std::make_move_iterator(postings.begin()), std::make_move_iterator(postings.end()));
}

std::vector<double> Bm25Index::scores(std::string_view query) const {
    std::vector<double> out(doc_lengths_.size(), 0.0);
    if (doc_lengths_.empty() || avg_length_ == 0.0) return out;
    const double n_docs = static_cast<double>(doc_lengths_.size());
    for (const auto& term : terms(query)) {
        auto it = std::lower_bound(postings_.begin(), postings_.end(), term,
                                   [](const auto& entry, const std::string& key) { return entry.first < key; });
        if (it == postings_.end() || it->first != term) continue;
        const double df = static_cast<double>(it->second.size());
        const double idf = std::log(1.0 + (n_docs - df + 0.5) / (df + 0.5));
        for (const auto& p : it->second) {
            const double norm = params_.k1 * (1.0 - params_.b + params_.b * doc_lengths_[p.doc] / avg_length_);
            out[p.doc] += idf * p.tf * (params_.k1 + 1.0) / (p.tf + norm);
        }
    }
    return out;
}

}  // namespace tinr
