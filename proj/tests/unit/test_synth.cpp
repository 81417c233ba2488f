#include <doctest.h>

#include <algorithm>
#include <set>

#include "narsal/synth.hpp"

using namespace narsal;

namespace {

int label_argmax(const SalienceLabels& labels) {
    return static_cast<int>(std::max_element(labels.counts.begin(), labels.counts.end()) -
                            labels.counts.begin());
}

/// Index of the peak template whose variant list contains the sentence, or -1.
int find_peak_template(const TemplateBank& bank, const std::string& sentence) {
    for (std::size_t p = 0; p < bank.peak.size(); ++p) {
        for (const std::string& variant : bank.peak[p].variants) {
            if (sentence == variant || sentence.rfind(variant + " ", 0) == 0) {
                return static_cast<int>(p);
            }
        }
    }
    return -1;
}

} // namespace

TEST_CASE("every short story has exactly one labeled peak") {
    SynthSpec spec;
    spec.stories = 50;
    spec.seed = 1;
    const SynthResult r = generate_synthetic(spec);
    REQUIRE(r.corpus.size() == 50);
    REQUIRE(r.labels.size() == 50);
    for (const SalienceLabels& l : r.labels) {
        int nonzero = 0;
        for (int c : l.counts) {
            if (c > 0) nonzero += 1;
        }
        CHECK(nonzero == 1);
        CHECK(l.counts[static_cast<std::size_t>(label_argmax(l))] == 5);
        // Interior position: never the first or last sentence.
        CHECK(label_argmax(l) > 0);
        CHECK(label_argmax(l) < static_cast<int>(l.counts.size()) - 1);
    }
}

TEST_CASE("generation is reproducible from the seed") {
    SynthSpec spec;
    spec.stories = 20;
    spec.seed = 42;
    const SynthResult a = generate_synthetic(spec);
    const SynthResult b = generate_synthetic(spec);
    REQUIRE(a.corpus.size() == b.corpus.size());
    for (std::size_t i = 0; i < a.corpus.size(); ++i) {
        CHECK(a.corpus[i] == b.corpus[i]);
        CHECK(a.labels[i].counts == b.labels[i].counts);
    }
    spec.seed = 43;
    const SynthResult c = generate_synthetic(spec);
    bool any_different = false;
    for (std::size_t i = 0; i < a.corpus.size(); ++i) {
        any_different = any_different || !(a.corpus[i] == c.corpus[i]);
    }
    CHECK(any_different);
}

TEST_CASE("twins share the peak event and distractors swap it") {
    SynthSpec spec;
    spec.stories = 40;
    spec.seed = 3;
    const SynthResult r = generate_synthetic(spec);
    const TemplateBank& bank = spec.templates;
    for (std::size_t s = 0; s < r.corpus.size(); ++s) {
        const CorpusRecord& rec = r.corpus[s];
        const int peak_pos = label_argmax(r.labels[s]);
        const int anchor_template =
            find_peak_template(bank, rec.anchor[static_cast<std::size_t>(peak_pos)]);
        REQUIRE(anchor_template >= 0);

        // The twin contains a variant of the same peak template somewhere.
        REQUIRE(rec.twin.has_value());
        int twin_template = -1;
        for (const std::string& sentence : *rec.twin) {
            const int t = find_peak_template(bank, sentence);
            if (t >= 0) twin_template = t;
        }
        CHECK(twin_template == anchor_template);

        // The twin retells the anchor's minor events (interior fillers shared
        // as a multiset, order free).
        std::multiset<std::string> anchor_fillers, twin_fillers;
        for (std::size_t i = 1; i + 1 < rec.anchor.size(); ++i) {
            if (find_peak_template(bank, rec.anchor[i]) < 0) anchor_fillers.insert(rec.anchor[i]);
            if (find_peak_template(bank, (*rec.twin)[i]) < 0) twin_fillers.insert((*rec.twin)[i]);
        }
        CHECK(anchor_fillers == twin_fillers);

        // The distractor keeps the position but swaps the event.
        REQUIRE(rec.distractor.has_value());
        const int dis_template =
            find_peak_template(bank, (*rec.distractor)[static_cast<std::size_t>(peak_pos)]);
        REQUIRE(dis_template >= 0);
        CHECK(dis_template != anchor_template);
        // Non-peak sentences are carried over verbatim.
        for (std::size_t i = 0; i < rec.anchor.size(); ++i) {
            if (static_cast<int>(i) == peak_pos) continue;
            CHECK((*rec.distractor)[i] == rec.anchor[i]);
        }
    }
}

TEST_CASE("long-form stories carry one turning point per window") {
    SynthSpec spec;
    spec.stories = 10;
    spec.windows = 5;
    spec.window_sentences = 8;
    spec.seed = 9;
    const SynthResult r = generate_synthetic(spec);
    for (std::size_t s = 0; s < r.corpus.size(); ++s) {
        const CorpusRecord& rec = r.corpus[s];
        CHECK(rec.anchor.size() == 40);
        CHECK(rec.twin->size() == 40);
        REQUIRE(r.labels[s].turning_points.has_value());
        const auto& tps = *r.labels[s].turning_points;
        REQUIRE(tps.size() == 5);
        for (int w = 0; w < 5; ++w) {
            CHECK(tps[static_cast<std::size_t>(w)].tp == w + 1);
            CHECK(tps[static_cast<std::size_t>(w)].sentence >= w * 8);
            CHECK(tps[static_cast<std::size_t>(w)].sentence < (w + 1) * 8);
        }
        // Every window shares the story's recurring minor events: the same
        // filler multiset around each window's own peak. Twins keep the peak
        // template; distractors repeat the anchor with the peak swapped.
        std::multiset<std::string> story_fillers;
        for (int w = 0; w < 5; ++w) {
            std::multiset<std::string> anchor_fillers, twin_fillers;
            const int peak = (*r.labels[s].turning_points)[static_cast<std::size_t>(w)].sentence;
            int anchor_tpl = -1, twin_tpl = -1, dis_tpl = -1;
            for (int k = w * 8; k < (w + 1) * 8; ++k) {
                const auto idx = static_cast<std::size_t>(k);
                const int a_tpl = find_peak_template(spec.templates, rec.anchor[idx]);
                const int t_tpl = find_peak_template(spec.templates, (*rec.twin)[idx]);
                if (a_tpl >= 0) {
                    anchor_tpl = a_tpl;
                    CHECK(k == peak);
                    dis_tpl = find_peak_template(spec.templates, (*rec.distractor)[idx]);
                } else {
                    anchor_fillers.insert(rec.anchor[idx]);
                    CHECK((*rec.distractor)[idx] == rec.anchor[idx]);
                }
                if (t_tpl >= 0) {
                    twin_tpl = t_tpl;
                } else {
                    twin_fillers.insert((*rec.twin)[idx]);
                }
            }
            CHECK(anchor_tpl >= 0);
            CHECK(twin_tpl == anchor_tpl);
            CHECK(dis_tpl >= 0);
            CHECK(dis_tpl != anchor_tpl);
            CHECK(anchor_fillers == twin_fillers);
            if (w == 0) {
                story_fillers = anchor_fillers;
            } else {
                CHECK(anchor_fillers == story_fillers);
            }
        }

        // Anchor and twin share one story-wide location phrase.
        const TemplateBank& bank = spec.templates;
        int story_loc = -1;
        for (std::size_t l = 0; l < bank.locations.size(); ++l) {
            if (rec.anchor[0].find(bank.locations[l]) != std::string::npos) {
                story_loc = static_cast<int>(l);
            }
        }
        REQUIRE(story_loc >= 0);
        const std::string& loc = bank.locations[static_cast<std::size_t>(story_loc)];
        for (std::size_t i = 0; i < rec.anchor.size(); ++i) {
            CHECK(rec.anchor[i].find(loc) != std::string::npos);
            CHECK((*rec.twin)[i].find(loc) != std::string::npos);
            CHECK((*rec.distractor)[i].find(loc) != std::string::npos);
        }
    }
}

TEST_CASE("spec JSON round-trips") {
    SynthSpec spec;
    spec.stories = 7;
    spec.sentences_min = 4;
    spec.sentences_max = 6;
    spec.seed = 77;
    const SynthSpec back = SynthSpec::from_json(spec.to_json());
    CHECK(back.to_json() == spec.to_json());
    const SynthResult a = generate_synthetic(spec);
    const SynthResult b = generate_synthetic(back);
    for (std::size_t i = 0; i < a.corpus.size(); ++i) CHECK(a.corpus[i] == b.corpus[i]);
}

TEST_CASE("degenerate specs are rejected") {
    SynthSpec spec;
    spec.stories = 0;
    CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
    spec.stories = 1;
    spec.sentences_min = 2;
    spec.sentences_max = 2;
    CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
    spec.sentences_min = 5;
    spec.sentences_max = 5;
    spec.windows = 6;
    CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
    spec.windows = 2;
    spec.window_sentences = 1;
    CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
    SynthSpec bank_spec;
    bank_spec.templates.peak.resize(1);
    CHECK_THROWS_AS(bank_spec.validate(), std::invalid_argument);
}
