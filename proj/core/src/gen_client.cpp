#include "narsal/gen_client.hpp"

#include <atomic>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <mutex>
#include <stdexcept>
#include <thread>

#include <httplib.h>
#include <json.hpp>

namespace narsal {

namespace {

const std::string kVerbosePrompt = R"({STORY}

The above story was written in order to describe a real situation. Many things occurred that the author did not include in the story. Now imagine you know everything about the situation. Write an extended 20-sentence story about the situation. Your story should have ALL of the following five properties.

1. Your story should be faithful to the events that occurred in the original story.

2. You should re-write all original events in your own words.

3. All new events should be entirely realistic given the original story.

4. Each sentence in the original story should become four sentences in your extended story.

5. Every sentence should be simple and shorter than the sentences in the original story.

Respond now only with your extended story in prose.)";

const std::string kRetellPrompt = R"({STORY}

Imagine that you want to tell the above story to your friend. Your task is to retell the story in five sentences. Your retelling should have ALL of the following five properties.

1. Your retelling should omit events that are not important to the provided story.

2. Your retelling should be faithful to the most important events occur in the provided story.

3. Your retelling should only include events that are in the provided story.

4. Every sentence should be logically related to the next sentence and be about the characters of the story.

5. Every sentence should be simple and short. Maximum one single clause.

Respond now only with your retelling in prose.)";

const std::string kNegativePrompt = R"({STORY}

Your task is now to write a new version of the above five-sentence story. Your story should be very similar to the above story. But you should change the climax completely. Your story should have ALL of the following properties.

1. Your story should involve all of the same characters as the above story.

2. Your story should be based on the same setting as the above story.

3. The main and most important event in your new story should be fundamentally different from what occurred in the above story.

4. Other than the main and most important event, your new story should be very similar to the above story.

5. Every sentence in your new story should be logically related to the next sentence and be about the characters of the story.

6. Your story should be entirely realistic.

7. Your story should read like a coherent story, with a specific beginning and end, where something happens in between.

8. Every sentence in your new story should be simple and short. Maximum one single clause.

9. Your story should be exactly five sentences.

Respond now only with your story in prose.)";

const std::string kWikiNegativePrompt = R"({STORY}

Your task is now to write a new story that takes heavy inspiration from the above 5-paragraph story. The new story should change the most important parts of the above story. The least important parts should be very similar to the above story.

You must change ALL of the following.

1. Change the main opportunity that is presented to the characters (approximately 10% of the way through the story; typically in section 1).

2. Change the main event that changes the plans and defines the goal (approximately 30% of the way through story; typically in section 2).

3. Change the point of no return event (approximately 50% of the way through; typically in section 3).

4. Change the major setback faced by the characters (approximately 70% of the way through; typically in section 4).

5. Change the climax event (approximately 90% of the way through; typically in section 5).

You must keep ALL of the following the same.

6. Keep all of the same characters as the above story.

7. Keep the same setting as the above story. Use the same names.

8. Keep all of the minor events the same. Make them a logical and realistic part of your new story.

Your story must have ALL of the following properties:

9. Your story should be approximately the same total length as the above story.

10. Your story should be exactly 5 sections. Section 1 of your new story should correspond to new version of section 1 in the above story; the same holds for sections 2-5.

11. Your story should be written in exactly the same style as the above story.

Respond now with your sections in prose.)";

struct ParsedUrl {
    std::string base; // scheme://host:port
    std::string path;
};

ParsedUrl parse_endpoint(const std::string& url) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) {
        throw std::invalid_argument("GenClient: endpoint must start with http:// or https://");
    }
    const auto path_start = url.find('/', scheme_end + 3);
    ParsedUrl out;
    if (path_start == std::string::npos) {
        out.base = url;
        out.path = "/v1/chat/completions";
    } else {
        out.base = url.substr(0, path_start);
        out.path = url.substr(path_start);
    }
    return out;
}

} // namespace

PromptKind prompt_kind_from_string(const std::string& s) {
    if (s == "verbose") return PromptKind::verbose;
    if (s == "retell") return PromptKind::retell;
    if (s == "negative") return PromptKind::negative;
    if (s == "wiki-negative") return PromptKind::wiki_negative;
    throw std::invalid_argument(
        "prompt kind must be one of verbose, retell, negative, wiki-negative; got '" + s + "'");
}

std::string prompt_kind_to_string(PromptKind kind) {
    switch (kind) {
        case PromptKind::verbose: return "verbose";
        case PromptKind::retell: return "retell";
        case PromptKind::negative: return "negative";
        case PromptKind::wiki_negative: return "wiki-negative";
    }
    throw std::logic_error("prompt_kind_to_string: bad enum");
}

const std::string& prompt_template(PromptKind kind) {
    switch (kind) {
        case PromptKind::verbose: return kVerbosePrompt;
        case PromptKind::retell: return kRetellPrompt;
        case PromptKind::negative: return kNegativePrompt;
        case PromptKind::wiki_negative: return kWikiNegativePrompt;
    }
    throw std::logic_error("prompt_template: bad enum");
}

std::string render_prompt(PromptKind kind, const std::string& story_text) {
    const std::string& tpl = prompt_template(kind);
    const auto pos = tpl.find("{STORY}");
    return tpl.substr(0, pos) + story_text + tpl.substr(pos + 7);
}

void GenClientConfig::validate() const {
    if (endpoint.empty()) {
        throw std::invalid_argument("GenClientConfig: endpoint is required");
    }
    if (max_retries < 0) {
        throw std::invalid_argument("GenClientConfig: retries must be >= 0");
    }
    if (concurrency < 1) {
        throw std::invalid_argument("GenClientConfig: concurrency must be >= 1");
    }
    parse_endpoint(endpoint);
}

std::vector<std::string> split_sentences(const std::string& text) {
    std::vector<std::string> out;
    std::string current;
    for (char ch : text) {
        if (ch == '\n' || ch == '\r') ch = ' ';
        current.push_back(ch);
        if (ch == '.' || ch == '!' || ch == '?') {
            // Trim and keep non-empty sentences.
            std::size_t b = current.find_first_not_of(' ');
            std::size_t e = current.find_last_not_of(' ');
            if (b != std::string::npos && current[b] != '.' && current[b] != '!' &&
                current[b] != '?') {
                out.push_back(current.substr(b, e - b + 1));
            }
            current.clear();
        }
    }
    std::size_t b = current.find_first_not_of(' ');
    if (b != std::string::npos) {
        std::size_t e = current.find_last_not_of(' ');
        out.push_back(current.substr(b, e - b + 1));
    }
    return out;
}

GenClient::GenClient(GenClientConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.validate();
}

GenOutcome GenClient::generate(PromptKind kind, const std::string& story_text) const {
    const ParsedUrl url = parse_endpoint(cfg_.endpoint);
    const std::string prompt = render_prompt(kind, story_text);
    nlohmann::json request = {
        {"model", cfg_.model},
        {"messages", nlohmann::json::array({{{"role", "user"}, {"content", prompt}}})},
        {"temperature", cfg_.temperature},
    };
    const std::string body = request.dump();

    GenOutcome outcome;
    std::string content;
    bool transported = false;
    for (int attempt = 0; attempt <= cfg_.max_retries; ++attempt) {
        outcome.attempts = attempt + 1;
        if (attempt > 0) {
            std::this_thread::sleep_for(
                std::chrono::milliseconds(static_cast<long long>(cfg_.backoff_ms) << (attempt - 1)));
        }
        httplib::Client client(url.base);
        client.set_connection_timeout(cfg_.timeout_seconds, 0);
        client.set_read_timeout(cfg_.timeout_seconds, 0);
        if (!cfg_.api_key_env.empty()) {
            if (const char* key = std::getenv(cfg_.api_key_env.c_str())) {
                client.set_default_headers({{"Authorization", std::string("Bearer ") + key}});
            }
        }
        auto res = client.Post(url.path, body, "application/json");
        if (!res) {
            outcome.error = "transport error: " + httplib::to_string(res.error());
            continue;
        }
        if (res->status < 200 || res->status >= 300) {
            outcome.error = "http status " + std::to_string(res->status);
            outcome.raw = res->body;
            continue;
        }
        outcome.raw = res->body;
        try {
            const nlohmann::json j = nlohmann::json::parse(res->body);
            content = j.at("choices").at(0).at("message").at("content").get<std::string>();
            transported = true;
        } catch (const nlohmann::json::exception& e) {
            outcome.error = std::string("malformed response: ") + e.what();
            transported = false;
        }
        break; // 2xx responses are not retried, even if malformed
    }
    if (!transported) {
        outcome.ok = false;
        return outcome;
    }

    outcome.raw = content;
    outcome.sentences = split_sentences(content);
    if ((kind == PromptKind::retell || kind == PromptKind::negative) &&
        outcome.sentences.size() != 5) {
        outcome.ok = false;
        outcome.error = "expected exactly 5 sentences, got " +
                        std::to_string(outcome.sentences.size());
        return outcome;
    }
    if (outcome.sentences.empty()) {
        outcome.ok = false;
        outcome.error = "empty response";
        return outcome;
    }
    outcome.ok = true;
    return outcome;
}

namespace {

std::string join_sentences(const std::vector<std::string>& sentences) {
    std::string out;
    for (std::size_t i = 0; i < sentences.size(); ++i) {
        if (i > 0) out += " ";
        out += sentences[i];
    }
    return out;
}

const char* source_field(PromptKind kind) {
    return kind == PromptKind::retell ? "verbose" : "anchor";
}

const char* target_field(PromptKind kind) {
    switch (kind) {
        case PromptKind::verbose: return "verbose";
        case PromptKind::retell: return "twin";
        case PromptKind::negative:
        case PromptKind::wiki_negative: return "distractor";
    }
    throw std::logic_error("target_field: bad enum");
}

} // namespace

GenRunStats generate_for_corpus(const std::filesystem::path& input,
                                const std::filesystem::path& output, PromptKind kind,
                                const GenClientConfig& cfg) {
    cfg.validate();
    std::ifstream in(input);
    if (!in) {
        throw std::runtime_error("cannot open " + input.string());
    }
    std::vector<nlohmann::json> records;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        lineno += 1;
        if (line.empty()) continue;
        try {
            records.push_back(nlohmann::json::parse(line));
        } catch (const nlohmann::json::exception& e) {
            throw std::runtime_error(input.string() + " line " + std::to_string(lineno) + ": " +
                                     e.what());
        }
    }

    const GenClient client(cfg);
    GenRunStats stats;
    std::mutex stats_mutex;
    std::atomic<std::size_t> next{0};

    auto worker = [&]() {
        while (true) {
            const std::size_t i = next.fetch_add(1);
            if (i >= records.size()) return;
            nlohmann::json& rec = records[i];
            const char* target = target_field(kind);
            if (rec.contains(target) && !rec.at(target).is_null()) {
                std::lock_guard<std::mutex> lock(stats_mutex);
                stats.skipped += 1;
                continue;
            }
            const char* source = source_field(kind);
            if (!rec.contains(source) || rec.at(source).is_null()) {
                rec["generation_error"] = {{"kind", prompt_kind_to_string(kind)},
                                           {"error", std::string("missing field '") + source + "'"},
                                           {"raw", nullptr}};
                std::lock_guard<std::mutex> lock(stats_mutex);
                stats.failed += 1;
                continue;
            }
            std::string story_text;
            if (rec.at(source).is_array()) {
                story_text = join_sentences(rec.at(source).get<std::vector<std::string>>());
            } else {
                story_text = rec.at(source).get<std::string>();
            }
            const GenOutcome outcome = client.generate(kind, story_text);
            if (outcome.ok) {
                rec[target] = outcome.sentences;
                std::lock_guard<std::mutex> lock(stats_mutex);
                stats.ok += 1;
            } else {
                rec["generation_error"] = {{"kind", prompt_kind_to_string(kind)},
                                           {"error", outcome.error},
                                           {"raw", outcome.raw},
                                           {"attempts", outcome.attempts}};
                std::lock_guard<std::mutex> lock(stats_mutex);
                stats.failed += 1;
            }
        }
    };

    std::vector<std::thread> threads;
    const int n_threads = std::min<int>(cfg.concurrency, static_cast<int>(records.size()));
    for (int t = 0; t < std::max(1, n_threads); ++t) threads.emplace_back(worker);
    for (std::thread& t : threads) t.join();

    std::ofstream out(output, std::ios::trunc);
    if (!out) {
        throw std::runtime_error("cannot open for writing: " + output.string());
    }
    for (const nlohmann::json& rec : records) out << rec.dump() << "\n";
    return stats;
}

} // namespace narsal
