#include "narsal/corpus_io.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace narsal {

namespace {

using nlohmann::json;

[[noreturn]] void schema_error(const std::filesystem::path& path, std::size_t line,
                               const std::string& detail) {
    throw std::runtime_error(path.string() + " line " + std::to_string(line) + ": " + detail);
}

json parse_line(const std::filesystem::path& path, std::size_t line, const std::string& text) {
    try {
        return json::parse(text);
    } catch (const json::exception& e) {
        schema_error(path, line, std::string("invalid JSON: ") + e.what());
    }
}

std::vector<std::string> sentence_list(const json& j, const std::filesystem::path& path,
                                       std::size_t line, const char* field) {
    if (!j.is_array()) {
        schema_error(path, line, std::string("field '") + field + "' must be an array of strings");
    }
    std::vector<std::string> out;
    for (const auto& item : j) {
        if (!item.is_string()) {
            schema_error(path, line,
                         std::string("field '") + field + "' must contain only strings");
        }
        out.push_back(item.get<std::string>());
    }
    return out;
}

template <typename Fn>
void for_each_jsonl_line(const std::filesystem::path& path, Fn&& fn) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open " + path.string());
    }
    std::string text;
    std::size_t line = 0;
    while (std::getline(in, text)) {
        line += 1;
        if (text.empty()) continue;
        fn(line, text);
    }
}

} // namespace

std::vector<CorpusRecord> read_corpus(const std::filesystem::path& path) {
    std::vector<CorpusRecord> records;
    for_each_jsonl_line(path, [&](std::size_t line, const std::string& text) {
        const json j = parse_line(path, line, text);
        CorpusRecord rec;
        if (!j.contains("id") || !j.at("id").is_string()) {
            schema_error(path, line, "field 'id' missing or not a string");
        }
        rec.id = j.at("id").get<std::string>();
        if (!j.contains("anchor")) {
            schema_error(path, line, "field 'anchor' missing");
        }
        rec.anchor = sentence_list(j.at("anchor"), path, line, "anchor");
        if (rec.anchor.empty()) {
            schema_error(path, line, "field 'anchor' must not be empty");
        }
        if (j.contains("twin") && !j.at("twin").is_null()) {
            rec.twin = sentence_list(j.at("twin"), path, line, "twin");
        }
        if (j.contains("distractor") && !j.at("distractor").is_null()) {
            rec.distractor = sentence_list(j.at("distractor"), path, line, "distractor");
        }
        records.push_back(std::move(rec));
    });
    return records;
}

void write_corpus(const std::filesystem::path& path, const std::vector<CorpusRecord>& records) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        throw std::runtime_error("cannot open for writing: " + path.string());
    }
    for (const auto& rec : records) {
        json j;
        j["id"] = rec.id;
        j["anchor"] = rec.anchor;
        j["twin"] = rec.twin ? json(*rec.twin) : json(nullptr);
        j["distractor"] = rec.distractor ? json(*rec.distractor) : json(nullptr);
        out << j.dump() << "\n";
    }
}

std::vector<SalienceLabels> read_labels(const std::filesystem::path& path) {
    std::vector<SalienceLabels> labels;
    for_each_jsonl_line(path, [&](std::size_t line, const std::string& text) {
        const json j = parse_line(path, line, text);
        SalienceLabels rec;
        if (!j.contains("id") || !j.at("id").is_string()) {
            schema_error(path, line, "field 'id' missing or not a string");
        }
        rec.story_id = j.at("id").get<std::string>();
        if (!j.contains("counts") || !j.at("counts").is_array()) {
            schema_error(path, line, "field 'counts' missing or not an array");
        }
        for (const auto& c : j.at("counts")) {
            if (!c.is_number_integer() || c.get<int>() < 0) {
                schema_error(path, line, "field 'counts' must contain non-negative integers");
            }
            rec.counts.push_back(c.get<int>());
        }
        if (j.contains("turning_points") && !j.at("turning_points").is_null()) {
            if (!j.at("turning_points").is_array()) {
                schema_error(path, line, "field 'turning_points' must be an array or null");
            }
            std::vector<TurningPoint> tps;
            for (const auto& t : j.at("turning_points")) {
                TurningPoint tp;
                if (!t.contains("tp") || !t.at("tp").is_number_integer()) {
                    schema_error(path, line, "field 'tp' missing or not an integer");
                }
                tp.tp = t.at("tp").get<int>();
                if (tp.tp < 1 || tp.tp > 5) {
                    schema_error(path, line, "field 'tp' must be in 1..5");
                }
                if (!t.contains("sentence") || !t.at("sentence").is_number_integer()) {
                    schema_error(path, line, "field 'sentence' missing or not an integer");
                }
                tp.sentence = t.at("sentence").get<int>();
                if (tp.sentence < 0 || tp.sentence >= static_cast<int>(rec.counts.size())) {
                    schema_error(path, line, "field 'sentence' out of range for counts length " +
                                                 std::to_string(rec.counts.size()));
                }
                tps.push_back(tp);
            }
            rec.turning_points = std::move(tps);
        }
        labels.push_back(std::move(rec));
    });
    return labels;
}

void write_labels(const std::filesystem::path& path, const std::vector<SalienceLabels>& labels) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        throw std::runtime_error("cannot open for writing: " + path.string());
    }
    for (const auto& rec : labels) {
        json j;
        j["id"] = rec.story_id;
        j["counts"] = rec.counts;
        if (rec.turning_points) {
            json arr = json::array();
            for (const auto& tp : *rec.turning_points) {
                arr.push_back({{"tp", tp.tp}, {"sentence", tp.sentence}});
            }
            j["turning_points"] = arr;
        } else {
            j["turning_points"] = nullptr;
        }
        out << j.dump() << "\n";
    }
}

TrainingExample to_training_example(const CorpusRecord& record, const Vocabulary& vocab) {
    TrainingExample ex;
    ex.anchor = tokenize_story(record.id, record.anchor, vocab);
    if (record.twin) {
        ex.twin = tokenize_story(record.id + "#twin", *record.twin, vocab);
    }
    if (record.distractor) {
        ex.distractor = tokenize_story(record.id + "#distractor", *record.distractor, vocab);
    }
    return ex;
}

std::vector<TrainingExample> tokenize_corpus(const std::vector<CorpusRecord>& records,
                                             const Vocabulary& vocab) {
    std::vector<TrainingExample> out;
    out.reserve(records.size());
    for (const auto& rec : records) out.push_back(to_training_example(rec, vocab));
    return out;
}

const std::vector<double>& StoryScores::operation(int idx) const {
    switch (idx) {
        case 0: return deletion;
        case 1: return shifting;
        case 2: return disruption;
        case 3: return summarization;
        default: throw std::out_of_range("StoryScores::operation: index " + std::to_string(idx));
    }
}

void write_score_csv(const std::filesystem::path& path, const std::vector<StoryScores>& scores) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        throw std::runtime_error("cannot open for writing: " + path.string());
    }
    out << "story_id,sentence_idx,deletion,shifting,disruption,summarization\n";
    out.precision(17);
    for (const auto& s : scores) {
        for (int i = 0; i < s.sentence_count(); ++i) {
            out << s.story_id << "," << i << "," << s.deletion[static_cast<std::size_t>(i)] << ","
                << s.shifting[static_cast<std::size_t>(i)] << ","
                << s.disruption[static_cast<std::size_t>(i)] << ","
                << s.summarization[static_cast<std::size_t>(i)] << "\n";
        }
    }
}

std::vector<StoryScores> read_score_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open " + path.string());
    }
    std::string line;
    if (!std::getline(in, line)) {
        throw std::runtime_error(path.string() + ": empty score file");
    }
    if (line != "story_id,sentence_idx,deletion,shifting,disruption,summarization") {
        throw std::runtime_error(path.string() + ": unexpected header '" + line + "'");
    }
    std::vector<StoryScores> out;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        lineno += 1;
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string field;
        std::vector<std::string> fields;
        while (std::getline(ss, field, ',')) fields.push_back(field);
        if (fields.size() != 6) {
            throw std::runtime_error(path.string() + " line " + std::to_string(lineno) +
                                     ": expected 6 fields, got " + std::to_string(fields.size()));
        }
        const std::string& id = fields[0];
        if (out.empty() || out.back().story_id != id) {
            out.push_back(StoryScores{id, {}, {}, {}, {}});
        }
        StoryScores& s = out.back();
        const int idx = std::stoi(fields[1]);
        if (idx != s.sentence_count()) {
            throw std::runtime_error(path.string() + " line " + std::to_string(lineno) +
                                     ": sentence_idx " + fields[1] + " out of order");
        }
        s.deletion.push_back(std::stod(fields[2]));
        s.shifting.push_back(std::stod(fields[3]));
        s.disruption.push_back(std::stod(fields[4]));
        s.summarization.push_back(std::stod(fields[5]));
    }
    return out;
}

} // namespace narsal
