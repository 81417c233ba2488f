#include "narsal/metrics.hpp"

#include "narsal/alignment.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace narsal {

namespace {

bool is_constant(const std::vector<double>& v) {
    for (double x : v) {
        if (x != v[0]) return false;
    }
    return true;
}

/// Average ranks, ascending (rank 1 = smallest), ties share the mean rank.
std::vector<double> average_ranks_ascending(const std::vector<double>& values) {
    const std::size_t n = values.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    std::vector<double> ranks(n, 0.0);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && values[order[j + 1]] == values[order[i]]) j += 1;
        const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
        i = j + 1;
    }
    return ranks;
}

double pearson(const std::vector<double>& x, const std::vector<double>& y) {
    const std::size_t n = x.size();
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = x[i] - mx;
        const double dy = y[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    return sxy / std::sqrt(sxx * syy);
}

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

} // namespace

MetricOutcome spearman_rho(const std::vector<double>& pred, const std::vector<double>& human) {
    if (pred.size() != human.size()) {
        throw std::invalid_argument("spearman_rho: length mismatch " +
                                    std::to_string(pred.size()) + " vs " +
                                    std::to_string(human.size()));
    }
    if (pred.size() < 2) {
        throw std::invalid_argument("spearman_rho: need at least 2 sentences");
    }
    if (is_constant(pred)) {
        return {std::nullopt, "predictions are constant"};
    }
    if (is_constant(human)) {
        return {std::nullopt, "human counts are constant"};
    }
    return {pearson(average_ranks_ascending(pred), average_ranks_ascending(human)), ""};
}

std::optional<AucCounts> auc_counts(const std::vector<double>& pred,
                                    const std::vector<int>& relevant) {
    if (pred.size() != relevant.size()) {
        throw std::invalid_argument("auc: length mismatch " + std::to_string(pred.size()) +
                                    " vs " + std::to_string(relevant.size()));
    }
    AucCounts counts;
    for (std::size_t r = 0; r < pred.size(); ++r) {
        if (!relevant[r]) continue;
        for (std::size_t s = 0; s < pred.size(); ++s) {
            if (relevant[s]) continue;
            counts.pairs += 1;
            if (pred[r] > pred[s]) {
                counts.doubled_wins += 2;
            } else if (pred[r] == pred[s]) {
                counts.doubled_wins += 1;
            }
        }
    }
    if (counts.pairs == 0) {
        return std::nullopt;
    }
    return counts;
}

MetricOutcome auc(const std::vector<double>& pred, const std::vector<int>& relevant) {
    const auto counts = auc_counts(pred, relevant);
    if (!counts) {
        return {std::nullopt, "needs at least one relevant and one irrelevant sentence"};
    }
    return {static_cast<double>(counts->doubled_wins) / static_cast<double>(2 * counts->pairs),
            ""};
}

WindowAucResult window_auc(const std::vector<double>& pred,
                           const std::vector<TurningPoint>& labels,
                           const WindowPartition& partition) {
    validate_partition(partition, static_cast<int>(pred.size()));
    WindowAucResult result;
    result.total_windows = partition.window_count();
    for (int w = 0; w < partition.window_count(); ++w) {
        const WindowBlock& block = partition.windows[static_cast<std::size_t>(w)];
        bool any_label = false;
        for (const TurningPoint& tp : labels) {
            if (tp.sentence < block.start || tp.sentence > block.end) continue;
            any_label = true;
            const double labeled_score = pred[static_cast<std::size_t>(tp.sentence)];
            int below = 0;
            for (int s = block.start; s <= block.end; ++s) {
                if (pred[static_cast<std::size_t>(s)] < labeled_score) below += 1;
            }
            result.entries.push_back(
                {w, tp.tp, block.size(),
                 static_cast<double>(below) / static_cast<double>(block.size())});
        }
        if (!any_label) result.skipped_windows += 1;
    }
    return result;
}

double paired_permutation_test(const std::vector<double>& metric_a,
                               const std::vector<double>& metric_b, int n_perm,
                               std::uint64_t seed) {
    if (metric_a.size() != metric_b.size()) {
        throw std::invalid_argument("paired_permutation_test: length mismatch");
    }
    if (metric_a.empty()) {
        throw std::invalid_argument("paired_permutation_test: no paired values");
    }
    if (n_perm < 1) {
        throw std::invalid_argument("paired_permutation_test: n_perm must be positive");
    }
    const std::size_t n = metric_a.size();
    std::vector<double> diff(n);
    for (std::size_t i = 0; i < n; ++i) diff[i] = metric_a[i] - metric_b[i];
    // Sums compare identically to means; skipping the division avoids rounding.
    double observed = 0.0;
    for (double d : diff) observed += d;
    observed = std::fabs(observed);

    // Exact enumeration when it is no more work than sampling.
    if (n < 63 && (1ULL << n) <= static_cast<std::uint64_t>(n_perm)) {
        const std::uint64_t total = 1ULL << n;
        std::uint64_t at_least = 0;
        for (std::uint64_t mask = 0; mask < total; ++mask) {
            double sum = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                sum += (mask >> i) & 1ULL ? -diff[i] : diff[i];
            }
            if (std::fabs(sum) >= observed) at_least += 1;
        }
        return static_cast<double>(at_least) / static_cast<double>(total);
    }

    RngStream stream(seed, hash_name("permutation-test"));
    int at_least = 0;
    for (int p = 0; p < n_perm; ++p) {
        double sum = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            sum += stream.next_unit() < 0.5 ? diff[i] : -diff[i];
        }
        if (std::fabs(sum) >= observed) at_least += 1;
    }
    return static_cast<double>(1 + at_least) / static_cast<double>(n_perm + 1);
}

LabelStats label_stats(const std::vector<SalienceLabels>& labels) {
    LabelStats stats;
    double entropy_sum = 0.0, perplexity_sum = 0.0;
    for (const SalienceLabels& l : labels) {
        long long total = 0;
        for (int c : l.counts) total += c;
        if (total == 0) {
            stats.skipped += 1;
            continue;
        }
        double h = 0.0;
        for (int c : l.counts) {
            if (c == 0) continue;
            const double p = static_cast<double>(c) / static_cast<double>(total);
            h -= p * std::log2(p);
        }
        entropy_sum += h;
        perplexity_sum += std::exp2(h);
        stats.stories += 1;
    }
    if (stats.stories > 0) {
        stats.mean_entropy = entropy_sum / stats.stories;
        stats.mean_perplexity = perplexity_sum / stats.stories;
    }
    return stats;
}

std::vector<double> baseline_scores(int sentence_count, BaselineKind kind, RngStream* stream) {
    if (sentence_count < 1) {
        throw std::invalid_argument("baseline_scores: empty story");
    }
    std::vector<double> out(static_cast<std::size_t>(sentence_count));
    switch (kind) {
        case BaselineKind::random:
            if (stream == nullptr) {
                throw std::invalid_argument("baseline_scores: random baseline needs a stream");
            }
            for (double& v : out) v = stream->next_unit();
            break;
        case BaselineKind::increasing:
            for (int i = 0; i < sentence_count; ++i) out[static_cast<std::size_t>(i)] = i + 1;
            break;
        case BaselineKind::decreasing:
            for (int i = 0; i < sentence_count; ++i) out[static_cast<std::size_t>(i)] = -(i + 1);
            break;
    }
    return out;
}

AggregateMetric aggregate_outcomes(const std::vector<MetricOutcome>& outcomes) {
    AggregateMetric agg;
    agg.per_story.reserve(outcomes.size());
    double sum = 0.0;
    for (const MetricOutcome& o : outcomes) {
        if (o.valid()) {
            agg.per_story.push_back(*o.value);
            sum += *o.value;
            agg.included += 1;
        } else {
            agg.per_story.push_back(kNaN);
            agg.skipped += 1;
        }
    }
    if (agg.included > 0) {
        agg.mean = sum / agg.included;
        double ss = 0.0;
        for (double v : agg.per_story) {
            if (!std::isnan(v)) ss += (v - agg.mean) * (v - agg.mean);
        }
        agg.stddev = agg.included > 1 ? std::sqrt(ss / (agg.included - 1)) : 0.0;
    }
    return agg;
}

double compare_paired(const std::vector<double>& per_story_a,
                      const std::vector<double>& per_story_b, int n_perm, std::uint64_t seed) {
    if (per_story_a.size() != per_story_b.size()) {
        throw std::invalid_argument("compare_paired: length mismatch");
    }
    std::vector<double> a, b;
    for (std::size_t i = 0; i < per_story_a.size(); ++i) {
        if (std::isnan(per_story_a[i]) || std::isnan(per_story_b[i])) continue;
        a.push_back(per_story_a[i]);
        b.push_back(per_story_b[i]);
    }
    if (a.empty()) {
        throw std::invalid_argument("compare_paired: no stories valid on both sides");
    }
    return paired_permutation_test(a, b, n_perm, seed);
}

namespace {

nlohmann::json aggregate_json(const AggregateMetric& agg) {
    return {{"mean", agg.included > 0 ? nlohmann::json(agg.mean) : nlohmann::json(nullptr)},
            {"stddev", agg.included > 0 ? nlohmann::json(agg.stddev) : nlohmann::json(nullptr)},
            {"stories", agg.included},
            {"skipped", agg.skipped}};
}

struct SystemRow {
    std::string name;
    AggregateMetric rho;
    AggregateMetric auc_agg;
};

} // namespace

nlohmann::json evaluate_corpus(const std::vector<StoryScores>& scores,
                               const std::vector<SalienceLabels>& labels,
                               const EvalOptions& options) {
    std::map<std::string, const StoryScores*> by_id;
    for (const StoryScores& s : scores) by_id.emplace(s.story_id, &s);

    // Stories evaluated in label-file order; ids missing from the score file
    // are reported, not fatal.
    std::vector<const SalienceLabels*> used_labels;
    std::vector<const StoryScores*> used_scores;
    int unmatched = 0;
    for (const SalienceLabels& l : labels) {
        const auto it = by_id.find(l.story_id);
        if (it == by_id.end()) {
            unmatched += 1;
            continue;
        }
        if (it->second->sentence_count() != static_cast<int>(l.counts.size())) {
            throw std::invalid_argument("evaluate_corpus: story '" + l.story_id + "' has " +
                                        std::to_string(it->second->sentence_count()) +
                                        " scored sentences but " +
                                        std::to_string(l.counts.size()) + " labels");
        }
        used_labels.push_back(&l);
        used_scores.push_back(it->second);
    }
    if (used_labels.empty()) {
        throw std::invalid_argument("evaluate_corpus: no story ids shared by scores and labels");
    }

    const RngState rng(options.seed);

    // Score vectors per system per story.
    std::vector<std::pair<std::string, std::vector<std::vector<double>>>> systems;
    for (int op = 0; op < 4; ++op) {
        std::vector<std::vector<double>> preds;
        preds.reserve(used_scores.size());
        for (const StoryScores* s : used_scores) preds.push_back(s->operation(op));
        systems.emplace_back(kOperationNames[op], std::move(preds));
    }
    if (options.include_baselines) {
        std::vector<std::vector<double>> rnd, inc, dec;
        for (std::size_t i = 0; i < used_labels.size(); ++i) {
            const int n = static_cast<int>(used_labels[i]->counts.size());
            RngStream stream = rng.stream("baseline-random", i);
            rnd.push_back(baseline_scores(n, BaselineKind::random, &stream));
            inc.push_back(baseline_scores(n, BaselineKind::increasing));
            dec.push_back(baseline_scores(n, BaselineKind::decreasing));
        }
        systems.emplace_back("random", std::move(rnd));
        systems.emplace_back("increasing", std::move(inc));
        systems.emplace_back("decreasing", std::move(dec));
    }

    nlohmann::json report;
    report["alpha"] = options.alpha;
    report["n_perm"] = options.n_perm;
    report["stories"] = used_labels.size();
    report["unmatched_labels"] = unmatched;
    const LabelStats ls = label_stats(labels);
    report["label_stats"] = {{"mean_entropy", ls.mean_entropy},
                             {"mean_perplexity", ls.mean_perplexity},
                             {"stories", ls.stories},
                             {"skipped", ls.skipped}};

    if (options.windows == 0) {
        report["mode"] = "story";
        std::vector<SystemRow> rows;
        for (const auto& [name, preds] : systems) {
            std::vector<MetricOutcome> rho_outcomes, auc_outcomes;
            for (std::size_t i = 0; i < used_labels.size(); ++i) {
                std::vector<double> human;
                std::vector<int> relevant;
                for (int c : used_labels[i]->counts) {
                    human.push_back(c);
                    relevant.push_back(c > 0 ? 1 : 0);
                }
                rho_outcomes.push_back(spearman_rho(preds[i], human));
                auc_outcomes.push_back(auc(preds[i], relevant));
            }
            rows.push_back({name, aggregate_outcomes(rho_outcomes),
                            aggregate_outcomes(auc_outcomes)});
        }
        nlohmann::json systems_json = nlohmann::json::array();
        for (const SystemRow& row : rows) {
            systems_json.push_back({{"name", row.name},
                                    {"spearman", aggregate_json(row.rho)},
                                    {"auc", aggregate_json(row.auc_agg)}});
        }
        report["systems"] = systems_json;

        nlohmann::json p_rho = nlohmann::json::object();
        nlohmann::json p_auc = nlohmann::json::object();
        for (std::size_t a = 0; a < rows.size(); ++a) {
            for (std::size_t b = a + 1; b < rows.size(); ++b) {
                const std::string key = rows[a].name + "|" + rows[b].name;
                if (rows[a].rho.included > 0 && rows[b].rho.included > 0) {
                    p_rho[key] = compare_paired(rows[a].rho.per_story, rows[b].rho.per_story,
                                                options.n_perm, options.seed);
                }
                if (rows[a].auc_agg.included > 0 && rows[b].auc_agg.included > 0) {
                    p_auc[key] = compare_paired(rows[a].auc_agg.per_story,
                                                rows[b].auc_agg.per_story, options.n_perm,
                                                options.seed);
                }
            }
        }
        report["pairwise_p"] = {{"spearman", p_rho}, {"auc", p_auc}};
        return report;
    }

    // Window-level evaluation: per-window AUC against turning-point labels.
    report["mode"] = "window";
    report["windows"] = options.windows;
    nlohmann::json systems_json = nlohmann::json::array();
    std::map<std::string, std::vector<double>> per_story_means;
    int skipped_windows = 0, total_windows = 0;
    for (const auto& [name, preds] : systems) {
        double sum = 0.0;
        int count = 0;
        std::array<double, 5> tp_sum{};
        std::array<int, 5> tp_count{};
        std::vector<double> story_means;
        int sys_skipped = 0, sys_total = 0;
        for (std::size_t i = 0; i < used_labels.size(); ++i) {
            const SalienceLabels& l = *used_labels[i];
            if (!l.turning_points || l.turning_points->empty()) {
                story_means.push_back(kNaN);
                continue;
            }
            const WindowPartition part =
                make_windows(static_cast<int>(l.counts.size()), options.windows);
            const WindowAucResult res = window_auc(preds[i], *l.turning_points, part);
            sys_skipped += res.skipped_windows;
            sys_total += res.total_windows;
            if (res.entries.empty()) {
                story_means.push_back(kNaN);
                continue;
            }
            double story_sum = 0.0;
            for (const WindowAucEntry& e : res.entries) {
                story_sum += e.value;
                sum += e.value;
                count += 1;
                tp_sum[static_cast<std::size_t>(e.tp - 1)] += e.value;
                tp_count[static_cast<std::size_t>(e.tp - 1)] += 1;
            }
            story_means.push_back(story_sum / res.entries.size());
        }
        nlohmann::json per_tp = nlohmann::json::object();
        for (int t = 0; t < 5; ++t) {
            per_tp["TP" + std::to_string(t + 1)] =
                tp_count[static_cast<std::size_t>(t)] > 0
                    ? nlohmann::json(tp_sum[static_cast<std::size_t>(t)] /
                                     tp_count[static_cast<std::size_t>(t)])
                    : nlohmann::json(nullptr);
        }
        systems_json.push_back(
            {{"name", name},
             {"window_auc",
              {{"mean", count > 0 ? nlohmann::json(sum / count) : nlohmann::json(nullptr)},
               {"windows_used", count},
               {"windows_skipped", sys_skipped},
               {"per_tp", per_tp}}}});
        per_story_means[name] = story_means;
        skipped_windows = sys_skipped;
        total_windows = sys_total;
    }
    report["systems"] = systems_json;
    report["window_skip_rate"] =
        total_windows > 0 ? static_cast<double>(skipped_windows) / total_windows : 0.0;

    nlohmann::json p_auc = nlohmann::json::object();
    for (std::size_t a = 0; a < systems.size(); ++a) {
        for (std::size_t b = a + 1; b < systems.size(); ++b) {
            const std::string key = systems[a].first + "|" + systems[b].first;
            try {
                p_auc[key] = compare_paired(per_story_means[systems[a].first],
                                            per_story_means[systems[b].first], options.n_perm,
                                            options.seed);
            } catch (const std::invalid_argument&) {
                p_auc[key] = nullptr;
            }
        }
    }
    report["pairwise_p"] = {{"window_auc", p_auc}};
    return report;
}

namespace {

void render_significant_pairs(std::ostringstream& os, const nlohmann::json& report,
                              const char* metric) {
    if (!report.contains("pairwise_p") || !report.at("pairwise_p").contains(metric)) return;
    const double alpha = report.value("alpha", 0.05);
    std::vector<std::string> significant;
    for (const auto& [key, p] : report.at("pairwise_p").at(metric).items()) {
        if (!p.is_null() && p.get<double>() < alpha) {
            significant.push_back(key + " (p=" + std::to_string(p.get<double>()) + ")");
        }
    }
    os << "\n" << metric << " pairs significant at alpha=" << alpha << ": "
       << significant.size() << "\n";
    for (const std::string& s : significant) os << "  " << s << "\n";
}

} // namespace

std::string render_eval_report(const nlohmann::json& report) {
    std::ostringstream os;
    os.precision(3);
    os << std::fixed;
    const std::string mode = report.at("mode").get<std::string>();
    os << "stories: " << report.at("stories").get<int>() << "  mode: " << mode << "\n";
    const auto& ls = report.at("label_stats");
    os << "labels: mean entropy " << ls.at("mean_entropy").get<double>() << " bits, perplexity "
       << ls.at("mean_perplexity").get<double>() << "\n\n";
    if (mode == "story") {
        os << "system          rho      AUC     (stories, skipped)\n";
        for (const auto& sys : report.at("systems")) {
            const auto& rho = sys.at("spearman");
            const auto& a = sys.at("auc");
            os << "  " << sys.at("name").get<std::string>();
            for (std::size_t pad = sys.at("name").get<std::string>().size(); pad < 14; ++pad)
                os << ' ';
            if (rho.at("mean").is_null()) {
                os << "   --  ";
            } else {
                os << (rho.at("mean").get<double>() < 0 ? "" : " ")
                   << rho.at("mean").get<double>();
            }
            os << "   ";
            if (a.at("mean").is_null()) {
                os << "  --  ";
            } else {
                os << a.at("mean").get<double>();
            }
            os << "    (" << rho.at("stories").get<int>() << ", " << rho.at("skipped").get<int>()
               << ")\n";
        }
        render_significant_pairs(os, report, "spearman");
        render_significant_pairs(os, report, "auc");
    } else {
        os << "window AUC over " << report.at("windows").get<int>() << " windows; skip rate "
           << report.at("window_skip_rate").get<double>() << "\n";
        os << "system          avg AUC   TP1    TP2    TP3    TP4    TP5\n";
        for (const auto& sys : report.at("systems")) {
            const auto& w = sys.at("window_auc");
            os << "  " << sys.at("name").get<std::string>();
            for (std::size_t pad = sys.at("name").get<std::string>().size(); pad < 14; ++pad)
                os << ' ';
            if (w.at("mean").is_null()) {
                os << "  --  ";
            } else {
                os << w.at("mean").get<double>();
            }
            for (int t = 1; t <= 5; ++t) {
                const auto& v = w.at("per_tp").at("TP" + std::to_string(t));
                if (v.is_null()) {
                    os << "    -- ";
                } else {
                    os << "  " << v.get<double>();
                }
            }
            os << "\n";
        }
        render_significant_pairs(os, report, "window_auc");
    }
    return os.str();
}

} // namespace narsal
