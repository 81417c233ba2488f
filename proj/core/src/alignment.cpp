#include "narsal/alignment.hpp"

#include <algorithm>
#include <fstream>
#include <limits>
#include <stdexcept>

#include <json.hpp>

namespace narsal {

SimilarityMatrix sentence_similarities(const Story& anchor, const Story& twin,
                                       const TokenEncoder& encoder) {
    if (anchor.sentence_count() == 0 || twin.sentence_count() == 0) {
        throw std::invalid_argument("sentence_similarities: empty story");
    }
    auto embed_sentences = [&](const Story& story) {
        std::vector<Tensor> out;
        out.reserve(static_cast<std::size_t>(story.sentence_count()));
        for (int s = 0; s < story.sentence_count(); ++s) {
            const DerivedSequence seq = sequence_single_sentence(story, s);
            const Tensor matrix = encoder.encode(seq.token_ids);
            out.push_back(pool_span(matrix, seq.spans[0], Pooling::mean));
        }
        return out;
    };
    const std::vector<Tensor> a = embed_sentences(anchor);
    const std::vector<Tensor> b = embed_sentences(twin);
    SimilarityMatrix sim;
    sim.rows = anchor.sentence_count();
    sim.cols = twin.sentence_count();
    sim.values.resize(static_cast<std::size_t>(sim.rows) * static_cast<std::size_t>(sim.cols));
    for (int i = 0; i < sim.rows; ++i) {
        for (int j = 0; j < sim.cols; ++j) {
            sim.at(i, j) = cosine_similarity(a[static_cast<std::size_t>(i)],
                                             b[static_cast<std::size_t>(j)]);
        }
    }
    return sim;
}

AlignmentPath dtw_align(const SimilarityMatrix& sim) {
    const int n = sim.rows, m = sim.cols;
    if (n < 1 || m < 1) {
        throw std::invalid_argument("dtw_align: empty similarity matrix");
    }
    std::vector<double> best(static_cast<std::size_t>(n) * static_cast<std::size_t>(m));
    // 0 = start, 1 = diagonal, 2 = from (i-1,j), 3 = from (i,j-1).
    std::vector<unsigned char> from(best.size(), 0);
    auto cell = [m](int i, int j) {
        return static_cast<std::size_t>(i) * static_cast<std::size_t>(m) +
               static_cast<std::size_t>(j);
    };
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < m; ++j) {
            double prev = 0.0;
            unsigned char arg = 0;
            if (i > 0 || j > 0) {
                prev = -std::numeric_limits<double>::infinity();
                // Evaluation order fixes the tie-break: diagonal, then (i-1,j),
                // then (i,j-1).
                if (i > 0 && j > 0 && best[cell(i - 1, j - 1)] > prev) {
                    prev = best[cell(i - 1, j - 1)];
                    arg = 1;
                }
                if (i > 0 && best[cell(i - 1, j)] > prev) {
                    prev = best[cell(i - 1, j)];
                    arg = 2;
                }
                if (j > 0 && best[cell(i, j - 1)] > prev) {
                    prev = best[cell(i, j - 1)];
                    arg = 3;
                }
            }
            best[cell(i, j)] = prev + sim.at(i, j);
            from[cell(i, j)] = arg;
        }
    }
    AlignmentPath path;
    int i = n - 1, j = m - 1;
    path.cells.emplace_back(i, j);
    while (i > 0 || j > 0) {
        switch (from[cell(i, j)]) {
            case 1: --i; --j; break;
            case 2: --i; break;
            case 3: --j; break;
            default:
                throw std::logic_error("dtw_align: backtrace reached a dead end");
        }
        path.cells.emplace_back(i, j);
    }
    std::reverse(path.cells.begin(), path.cells.end());
    return path;
}

double path_score(const SimilarityMatrix& sim, const AlignmentPath& path) {
    double s = 0.0;
    for (const auto& [i, j] : path.cells) s += sim.at(i, j);
    return s;
}

WindowPartition make_windows(int sentence_count, int window_count) {
    if (window_count < 1) {
        throw std::invalid_argument("make_windows: window count must be positive");
    }
    if (sentence_count < window_count) {
        throw std::invalid_argument("make_windows: " + std::to_string(sentence_count) +
                                    " sentences cannot fill " + std::to_string(window_count) +
                                    " windows");
    }
    const int base = sentence_count / window_count;
    const int extra = sentence_count % window_count;
    WindowPartition part;
    int start = 0;
    for (int w = 0; w < window_count; ++w) {
        const int size = base + (w < extra ? 1 : 0);
        part.windows.push_back({start, start + size - 1});
        start += size;
    }
    return part;
}

WindowPartition project_windows(const AlignmentPath& path, const WindowPartition& anchor_partition,
                                int twin_sentence_count) {
    if (path.cells.empty()) {
        throw std::invalid_argument("project_windows: empty path");
    }
    WindowPartition twin;
    int prev_end = -1;
    for (const WindowBlock& w : anchor_partition.windows) {
        int lo = std::numeric_limits<int>::max();
        int hi = std::numeric_limits<int>::min();
        for (const auto& [i, j] : path.cells) {
            if (i >= w.start && i <= w.end) {
                lo = std::min(lo, j);
                hi = std::max(hi, j);
            }
        }
        if (lo > hi) {
            throw std::invalid_argument("project_windows: path does not cover anchor window [" +
                                        std::to_string(w.start) + "," + std::to_string(w.end) +
                                        "]");
        }
        // Boundary sentences belong to the earlier window.
        const int start = std::max(lo, prev_end + 1);
        twin.windows.push_back({start, hi});
        prev_end = std::max(prev_end, hi);
    }
    if (prev_end != twin_sentence_count - 1) {
        throw std::invalid_argument("project_windows: path covers twin sentences up to " +
                                    std::to_string(prev_end) + " of " +
                                    std::to_string(twin_sentence_count));
    }
    return twin;
}

bool twin_filter_keep(const WindowPartition& twin_windows, int anchor_sentences,
                      int twin_sentences, const TwinFilterConfig& filter, std::string* reason) {
    if (anchor_sentences < filter.min_anchor_sentences) {
        if (reason) {
            *reason = "anchor has " + std::to_string(anchor_sentences) + " sentences, minimum is " +
                      std::to_string(filter.min_anchor_sentences);
        }
        return false;
    }
    if (std::abs(twin_sentences - anchor_sentences) > filter.twin_length_band) {
        if (reason) {
            *reason = "twin length " + std::to_string(twin_sentences) + " outside band of " +
                      std::to_string(filter.twin_length_band) + " around " +
                      std::to_string(anchor_sentences);
        }
        return false;
    }
    for (std::size_t w = 0; w < twin_windows.windows.size(); ++w) {
        const WindowBlock& b = twin_windows.windows[w];
        const int size = b.empty() ? 0 : b.size();
        if (size < filter.min_twin_window) {
            if (reason) {
                *reason = "twin window " + std::to_string(w) + " has " + std::to_string(size) +
                          " sentences, minimum is " + std::to_string(filter.min_twin_window);
            }
            return false;
        }
    }
    if (reason) reason->clear();
    return true;
}

StoryAlignment align_example(const Story& anchor, const Story& twin, const TokenEncoder& encoder,
                             int window_count, const TwinFilterConfig& filter) {
    StoryAlignment out;
    out.id = anchor.id;
    if (anchor.sentence_count() < window_count) {
        out.kept = false;
        out.drop_reason = "anchor has " + std::to_string(anchor.sentence_count()) +
                          " sentences, fewer than " + std::to_string(window_count) + " windows";
        return out;
    }
    out.anchor_windows = make_windows(anchor.sentence_count(), window_count);
    const SimilarityMatrix sim = sentence_similarities(anchor, twin, encoder);
    out.path = dtw_align(sim);
    out.twin_windows = project_windows(out.path, out.anchor_windows, twin.sentence_count());
    out.kept = twin_filter_keep(out.twin_windows, anchor.sentence_count(), twin.sentence_count(),
                                filter, &out.drop_reason);
    return out;
}

namespace {

nlohmann::json windows_to_json(const WindowPartition& part) {
    nlohmann::json arr = nlohmann::json::array();
    for (const WindowBlock& w : part.windows) arr.push_back({w.start, w.end});
    return arr;
}

WindowPartition windows_from_json(const nlohmann::json& arr) {
    WindowPartition part;
    for (const auto& w : arr) {
        part.windows.push_back({w.at(0).get<int>(), w.at(1).get<int>()});
    }
    return part;
}

} // namespace

void write_alignments(const std::filesystem::path& path,
                      const std::vector<StoryAlignment>& alignments) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        throw std::runtime_error("cannot open for writing: " + path.string());
    }
    for (const StoryAlignment& a : alignments) {
        nlohmann::json j;
        j["id"] = a.id;
        nlohmann::json cells = nlohmann::json::array();
        for (const auto& [i, k] : a.path.cells) cells.push_back({i, k});
        j["path"] = cells;
        j["anchor_windows"] = windows_to_json(a.anchor_windows);
        j["twin_windows"] = windows_to_json(a.twin_windows);
        j["kept"] = a.kept;
        if (!a.kept) j["drop_reason"] = a.drop_reason;
        out << j.dump() << "\n";
    }
}

std::vector<StoryAlignment> read_alignments(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open " + path.string());
    }
    std::vector<StoryAlignment> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        lineno += 1;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw std::runtime_error(path.string() + " line " + std::to_string(lineno) + ": " +
                                     e.what());
        }
        StoryAlignment a;
        a.id = j.at("id").get<std::string>();
        for (const auto& cell : j.at("path")) {
            a.path.cells.emplace_back(cell.at(0).get<int>(), cell.at(1).get<int>());
        }
        a.anchor_windows = windows_from_json(j.at("anchor_windows"));
        a.twin_windows = windows_from_json(j.at("twin_windows"));
        a.kept = j.at("kept").get<bool>();
        a.drop_reason = j.value("drop_reason", std::string());
        out.push_back(std::move(a));
    }
    return out;
}

AlignmentMap alignment_map(const std::vector<StoryAlignment>& alignments) {
    AlignmentMap map;
    for (const StoryAlignment& a : alignments) map.emplace(a.id, a);
    return map;
}

} // namespace narsal
