#include "narsal/synth.hpp"

#include <stdexcept>

#include "narsal/rng.hpp"

namespace narsal {

TemplateBank TemplateBank::defaults() {
    TemplateBank bank;
    bank.setup = {
        "the village woke slowly under a pale sky",
        "the harbor town opened its shutters at dawn",
        "the old farm lay quiet in the morning light",
        "the market square filled with early voices",
        "the mountain camp stirred before sunrise",
        "the river barge drifted into the small port",
        "the schoolyard gates creaked open that morning",
        "the lighthouse keeper began an ordinary day",
    };
    bank.filler = {
        "the weather stayed mild through the afternoon",
        "neighbors traded small news over the fence",
        "a cart rolled past without stopping",
        "someone hummed an old tune nearby",
        "the bread seller counted her coins twice",
        "children chased a hoop along the lane",
        "an old dog dozed beside the doorway",
        "smoke curled gently from a far chimney",
        "the clock tower marked the hour as always",
        "a light breeze moved the hanging laundry",
        "two fishermen mended their nets in silence",
        "the postman leaned his bicycle on the wall",
        "a kettle whistled softly in a back kitchen",
        "gulls circled lazily above the rooftops",
        "the carpenter swept shavings from his bench",
        "lanterns were trimmed and set out for evening",
        "a ledger was balanced and closed for the day",
        "the ferry crossed on its usual schedule",
        "a stray cat patrolled the quiet alley",
        "fresh hay was stacked beside the stable",
        "the innkeeper wiped the long oak counter",
        "a seamstress pinned a hem by the window",
        "rain barrels stood full after the night",
        "the orchard rows looked tidy and calm",
    };
    bank.peak = {
        {{"suddenly the dragon stole the golden crown",
          "the dragon swooped in and stole the crown",
          "without warning the dragon stole the crown"}},
        {{"then the flood burst through the stone dam",
          "the flood roared as it burst the dam",
          "at once the flood burst the old dam"}},
        {{"suddenly the thief grabbed the silver chalice",
          "the thief darted out and grabbed the chalice",
          "in a flash the thief grabbed the chalice"}},
        {{"then the mayor announced the mine had collapsed",
          "the mayor stood up and announced the collapsed mine",
          "gravely the mayor announced the mine collapse"}},
        {{"suddenly the ship struck the hidden reef",
          "the ship lurched as it struck the reef",
          "with a crack the ship struck the reef"}},
        {{"then the fire leapt across the thatched roofs",
          "the fire spread fast across the roofs",
          "in minutes the fire took the thatched roofs"}},
        {{"suddenly the wolf snatched the prized lamb",
          "the wolf slipped in and snatched the lamb",
          "before anyone moved the wolf snatched the lamb"}},
        {{"then the bridge gave way beneath the wagon",
          "the bridge cracked and gave way under the wagon",
          "with a groan the bridge gave way"}},
        {{"suddenly the duchess revealed the forged will",
          "the duchess held up the forged will for all",
          "calmly the duchess revealed the forgery"}},
        {{"then the storm tore the mill sails away",
          "the storm ripped the sails from the mill",
          "howling winds tore the mill sails loose"}},
        {{"suddenly the twins found the buried chest",
          "the twins dug up the buried chest",
          "against all odds the twins found the chest"}},
        {{"then the magistrate freed the accused baker",
          "the magistrate declared the baker free",
          "to general surprise the magistrate freed the baker"}},
        {{"suddenly the bull broke loose in the square",
          "the bull charged loose through the square",
          "panic rose as the bull broke loose"}},
        {{"then the comet blazed across the evening sky",
          "a comet streaked blazing over the town",
          "that night the comet blazed overhead"}},
        {{"suddenly the well ran completely dry",
          "the well gave its last bucket and ran dry",
          "by noon the well had run dry"}},
        {{"then the soldiers returned after ten years",
          "the soldiers marched home after ten years",
          "unannounced the soldiers returned at last"}},
    };
    bank.resolution = {
        "by nightfall things settled into a new calm",
        "everyone went home turning the day over",
        "the town talked of little else for weeks",
        "life resumed though nothing felt the same",
        "order returned slowly over the next days",
        "they closed the day grateful and tired",
        "a quiet agreement ended the long day",
        "the lamps were lit and the day ended",
    };
    bank.locations = {
        "near the harbor wall", "by the old granary", "under the clock tower",
        "beside the mill pond", "along the cedar road", "behind the tannery",
        "at the north gate",    "by the ferry landing",
    };
    return bank;
}

void TemplateBank::validate() const {
    if (setup.empty() || filler.empty() || resolution.empty()) {
        throw std::invalid_argument("TemplateBank: setup, filler and resolution must be non-empty");
    }
    if (peak.size() < 2) {
        throw std::invalid_argument(
            "TemplateBank: need at least 2 peak templates so distractors can swap the event");
    }
    for (const PeakTemplate& p : peak) {
        if (p.variants.empty()) {
            throw std::invalid_argument("TemplateBank: peak template with no variants");
        }
    }
    if (locations.empty()) {
        throw std::invalid_argument("TemplateBank: locations must be non-empty");
    }
}

void SynthSpec::validate() const {
    templates.validate();
    if (stories < 1) {
        throw std::invalid_argument("SynthSpec: stories must be positive");
    }
    if (windows == 0) {
        if (sentences_min < 3 || sentences_max < sentences_min) {
            throw std::invalid_argument(
                "SynthSpec: short-form stories need >=3 sentences and a valid range");
        }
    } else {
        if (windows < 1 || windows > 5) {
            throw std::invalid_argument("SynthSpec: windows must lie in 1..5 (TP1..TP5 tags)");
        }
        if (window_sentences < 2) {
            throw std::invalid_argument("SynthSpec: window_sentences must be >= 2");
        }
    }
}

nlohmann::json SynthSpec::to_json() const {
    nlohmann::json peaks = nlohmann::json::array();
    for (const PeakTemplate& p : templates.peak) peaks.push_back(p.variants);
    return {{"stories", stories},
            {"sentences_min", sentences_min},
            {"sentences_max", sentences_max},
            {"windows", windows},
            {"window_sentences", window_sentences},
            {"seed", seed},
            {"templates",
             {{"setup", templates.setup},
              {"filler", templates.filler},
              {"peak", peaks},
              {"resolution", templates.resolution},
              {"locations", templates.locations}}}};
}

SynthSpec SynthSpec::from_json(const nlohmann::json& j) {
    SynthSpec spec;
    spec.stories = j.value("stories", spec.stories);
    spec.sentences_min = j.value("sentences_min", spec.sentences_min);
    spec.sentences_max = j.value("sentences_max", spec.sentences_max);
    spec.windows = j.value("windows", spec.windows);
    spec.window_sentences = j.value("window_sentences", spec.window_sentences);
    spec.seed = j.value("seed", spec.seed);
    if (j.contains("templates")) {
        const auto& t = j.at("templates");
        if (t.contains("setup")) spec.templates.setup = t.at("setup").get<std::vector<std::string>>();
        if (t.contains("filler")) {
            spec.templates.filler = t.at("filler").get<std::vector<std::string>>();
        }
        if (t.contains("peak")) {
            spec.templates.peak.clear();
            for (const auto& variants : t.at("peak")) {
                spec.templates.peak.push_back({variants.get<std::vector<std::string>>()});
            }
        }
        if (t.contains("resolution")) {
            spec.templates.resolution = t.at("resolution").get<std::vector<std::string>>();
        }
        if (t.contains("locations")) {
            spec.templates.locations = t.at("locations").get<std::vector<std::string>>();
        }
    }
    spec.validate();
    return spec;
}

namespace {

int draw_index(RngStream& rng, std::size_t n) {
    return static_cast<int>(rng.next_below(static_cast<std::uint64_t>(n)));
}

/// A variant index different from `taken` when more than one exists.
int draw_other_variant(RngStream& rng, std::size_t n, int taken) {
    if (n < 2) return taken;
    int v = draw_index(rng, n - 1);
    if (v >= taken) v += 1;
    return v;
}

std::string story_id(int index) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "synth-%06d", index);
    return buf;
}

} // namespace

SynthResult generate_synthetic(const SynthSpec& spec) {
    spec.validate();
    const TemplateBank& bank = spec.templates;
    const RngState rng_root(spec.seed);
    SynthResult result;
    result.corpus.reserve(static_cast<std::size_t>(spec.stories));
    result.labels.reserve(static_cast<std::size_t>(spec.stories));

    for (int s = 0; s < spec.stories; ++s) {
        RngStream rng = rng_root.stream("synth-story", static_cast<std::uint64_t>(s));
        CorpusRecord rec;
        rec.id = story_id(s);
        SalienceLabels labels;
        labels.story_id = rec.id;

        if (spec.windows == 0) {
            const int n = spec.sentences_min +
                          (spec.sentences_max > spec.sentences_min
                               ? draw_index(rng, static_cast<std::size_t>(spec.sentences_max -
                                                                          spec.sentences_min + 1))
                               : 0);
            const int peak_pos = 1 + draw_index(rng, static_cast<std::size_t>(n - 2));
            const int peak_template = draw_index(rng, bank.peak.size());
            const auto& variants = bank.peak[static_cast<std::size_t>(peak_template)].variants;
            const int anchor_variant = draw_index(rng, variants.size());

            // Anchor: setup, fillers, one peak, resolution.
            std::vector<std::string> anchor(static_cast<std::size_t>(n));
            anchor.front() = bank.setup[static_cast<std::size_t>(draw_index(rng, bank.setup.size()))];
            anchor.back() =
                bank.resolution[static_cast<std::size_t>(draw_index(rng, bank.resolution.size()))];
            for (int i = 1; i < n - 1; ++i) {
                anchor[static_cast<std::size_t>(i)] =
                    bank.filler[static_cast<std::size_t>(draw_index(rng, bank.filler.size()))];
            }
            anchor[static_cast<std::size_t>(peak_pos)] =
                variants[static_cast<std::size_t>(anchor_variant)];

            // Twin: the same story retold. The peak keeps its content words in
            // a different surface variant at a redrawn position; the minor
            // events are carried over in a reshuffled order with a fresh
            // opening and ending. The shared minor events are what make the
            // distractor necessary: matching anchor to twin among unrelated
            // in-batch stories is already possible on them alone.
            const int twin_pos = 1 + draw_index(rng, static_cast<std::size_t>(n - 2));
            const int twin_variant = draw_other_variant(rng, variants.size(), anchor_variant);
            std::vector<std::string> carried;
            for (int i = 1; i < n - 1; ++i) {
                if (i != peak_pos) carried.push_back(anchor[static_cast<std::size_t>(i)]);
            }
            for (std::size_t k = carried.size(); k > 1; --k) {
                std::swap(carried[k - 1], carried[static_cast<std::size_t>(rng.next_below(k))]);
            }
            std::vector<std::string> twin(static_cast<std::size_t>(n));
            twin.front() = bank.setup[static_cast<std::size_t>(draw_index(rng, bank.setup.size()))];
            twin.back() =
                bank.resolution[static_cast<std::size_t>(draw_index(rng, bank.resolution.size()))];
            std::size_t ci = 0;
            for (int i = 1; i < n - 1; ++i) {
                if (i == twin_pos) {
                    twin[static_cast<std::size_t>(i)] =
                        variants[static_cast<std::size_t>(twin_variant)];
                } else {
                    twin[static_cast<std::size_t>(i)] = carried[ci++];
                }
            }

            // Distractor: anchor's sentences with the peak event swapped.
            int other_template = draw_index(rng, bank.peak.size() - 1);
            if (other_template >= peak_template) other_template += 1;
            const auto& other_variants =
                bank.peak[static_cast<std::size_t>(other_template)].variants;
            std::vector<std::string> distractor = anchor;
            distractor[static_cast<std::size_t>(peak_pos)] =
                other_variants[static_cast<std::size_t>(draw_index(rng, other_variants.size()))];

            rec.anchor = std::move(anchor);
            rec.twin = std::move(twin);
            rec.distractor = std::move(distractor);
            labels.counts.assign(static_cast<std::size_t>(n), 0);
            labels.counts[static_cast<std::size_t>(peak_pos)] = 5;
        } else {
            const int W = spec.windows;
            const int K = spec.window_sentences;
            const int n = W * K;
            std::vector<std::string> anchor(static_cast<std::size_t>(n));
            std::vector<std::string> twin(static_cast<std::size_t>(n));
            std::vector<std::string> distractor(static_cast<std::size_t>(n));
            labels.counts.assign(static_cast<std::size_t>(n), 0);
            std::vector<TurningPoint> tps;

            // Long-form stories mimic chapters of one narrative: a shared
            // setting (one location phrase) and a recurring cast of minor
            // events appear in every window, so windows of the same story are
            // surface-alike and differ in their peak event alone. That is
            // what makes the story's other windows hard in-story negatives.
            const std::string& loc =
                bank.locations[static_cast<std::size_t>(draw_index(rng, bank.locations.size()))];
            std::vector<std::string> story_fillers;
            for (int k = 0; k < K - 1; ++k) {
                story_fillers.push_back(
                    bank.filler[static_cast<std::size_t>(draw_index(rng, bank.filler.size()))] +
                    " " + loc);
            }
            auto shuffle_fillers = [&rng](std::vector<std::string> fillers) {
                for (std::size_t k = fillers.size(); k > 1; --k) {
                    std::swap(fillers[k - 1],
                              fillers[static_cast<std::size_t>(rng.next_below(k))]);
                }
                return fillers;
            };
            auto fill_window = [K](std::vector<std::string>& story_out, int base, int peak_offset,
                                   const std::string& peak_sentence,
                                   const std::vector<std::string>& fillers) {
                int fi = 0;
                for (int k = 0; k < K; ++k) {
                    const auto idx = static_cast<std::size_t>(base + k);
                    if (k == peak_offset) {
                        story_out[idx] = peak_sentence;
                    } else {
                        story_out[idx] = fillers[static_cast<std::size_t>(fi++)];
                    }
                }
            };

            for (int w = 0; w < W; ++w) {
                const int base = w * K;
                const int peak_offset = draw_index(rng, static_cast<std::size_t>(K));
                const int twin_offset = draw_index(rng, static_cast<std::size_t>(K));
                const int peak_template = draw_index(rng, bank.peak.size());
                const auto& variants =
                    bank.peak[static_cast<std::size_t>(peak_template)].variants;
                const int anchor_variant = draw_index(rng, variants.size());
                const int twin_variant = draw_other_variant(rng, variants.size(), anchor_variant);
                int other_template = draw_index(rng, bank.peak.size() - 1);
                if (other_template >= peak_template) other_template += 1;
                const auto& other_variants =
                    bank.peak[static_cast<std::size_t>(other_template)].variants;

                const std::vector<std::string> anchor_order = shuffle_fillers(story_fillers);
                const std::vector<std::string> twin_order = shuffle_fillers(story_fillers);
                fill_window(anchor, base, peak_offset,
                            variants[static_cast<std::size_t>(anchor_variant)] + " " + loc,
                            anchor_order);
                fill_window(twin, base, twin_offset,
                            variants[static_cast<std::size_t>(twin_variant)] + " " + loc,
                            twin_order);
                // The distractor repeats the anchor verbatim with the peak
                // event swapped.
                fill_window(distractor, base, peak_offset,
                            other_variants[static_cast<std::size_t>(
                                draw_index(rng, other_variants.size()))] +
                                " " + loc,
                            anchor_order);
                labels.counts[static_cast<std::size_t>(base + peak_offset)] = 5;
                tps.push_back({w + 1, base + peak_offset});
            }
            rec.anchor = std::move(anchor);
            rec.twin = std::move(twin);
            rec.distractor = std::move(distractor);
            labels.turning_points = std::move(tps);
        }

        result.corpus.push_back(std::move(rec));
        result.labels.push_back(std::move(labels));
    }
    return result;
}

} // namespace narsal
