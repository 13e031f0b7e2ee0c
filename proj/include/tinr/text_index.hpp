#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace tinr {

// Lowercased maximal runs of ASCII letters and digits. Everything else separates.
std::vector<std::string> terms(std::string_view text);

// Sparse term-frequency vector, sorted by term.
class TermVector {
public:
    TermVector() = default;
    explicit TermVector(const std::vector<std::string>& tokens);

    const std::vector<std::pair<std::string, double>>& entries() const { return entries_; }
    double norm() const { return norm_; }

private:
    std::vector<std::pair<std::string, double>> entries_;
    double norm_ = 0.0;
};

// Cosine similarity; 0 when either vector is empty.
double cosine(const TermVector& a, const TermVector& b);

struct Bm25Params {
    double k1 = 1.2;
    double b = 0.75;
};

// Okapi BM25 over a fixed corpus. idf(t) = ln(1 + (N - n_t + 0.5) / (n_t + 0.5)),
// which keeps every term weight non-negative. Query terms are summed per
// occurrence.
class Bm25Index {
public:
    explicit Bm25Index(const std::vector<std::string>& documents, Bm25Params params = {});

    std::size_t size() const { return doc_lengths_.size(); }
    std::vector<double> scores(std::string_view query) const;

private:
    struct Posting {
        std::size_t doc;
        double tf;
    };

    Bm25Params params_;
    std::vector<double> doc_lengths_;
    double avg_length_ = 0.0;
    std::vector<std::pair<std::string, std::vector<Posting>>> postings_;  // sorted by term
};

}  // namespace tinr
