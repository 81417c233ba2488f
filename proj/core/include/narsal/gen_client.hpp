#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace narsal {

enum class PromptKind { verbose, retell, negative, wiki_negative };

PromptKind prompt_kind_from_string(const std::string& s);
std::string prompt_kind_to_string(PromptKind kind);

/// The instruction template for a prompt kind, with a literal {STORY}
/// placeholder. What goes on the wire is exactly this text with the
/// placeholder substituted.
const std::string& prompt_template(PromptKind kind);
std::string render_prompt(PromptKind kind, const std::string& story_text);

struct GenClientConfig {
    /// Full URL, e.g. http://localhost:8089/v1/chat/completions. A URL with
    /// no path gets /v1/chat/completions appended.
    std::string endpoint;
    std::string model = "gpt-4.1-mini";
    double temperature = 1.0;
    int max_retries = 2;
    int timeout_seconds = 30;
    int concurrency = 1;
    /// Backoff before retry k is backoff_ms * 2^k.
    int backoff_ms = 250;
    /// Name of the environment variable holding the bearer token; unset or
    /// empty means no Authorization header.
    std::string api_key_env = "NARSAL_API_KEY";

    void validate() const;
};

struct GenOutcome {
    bool ok = false;
    std::vector<std::string> sentences;
    std::string error;
    std::string raw; // response body or model text, kept on failure
    int attempts = 0;
};

/// Splits model prose into sentences on ., ! and ? boundaries.
std::vector<std::string> split_sentences(const std::string& text);

/// Chat-style completions client: posts {model, messages, temperature} and
/// reads choices[0].message.content. Transport failures retry with
/// exponential backoff; a response with the wrong sentence count (retell and
/// negative demand exactly 5) is a validation failure, not a retry.
class GenClient {
public:
    explicit GenClient(GenClientConfig cfg);

    GenOutcome generate(PromptKind kind, const std::string& story_text) const;

    const GenClientConfig& config() const { return cfg_; }

private:
    GenClientConfig cfg_;
};

struct GenRunStats {
    int ok = 0;
    int failed = 0;
    int skipped = 0; // target field already present
};

/// Streams a corpus JSONL file through the client, appending the generated
/// field per record (verbose -> "verbose", retell -> "twin", negative and
/// wiki-negative -> "distractor"). Unknown fields pass through untouched;
/// failures append a "generation_error" object and leave the record intact.
/// Requests may run concurrently up to cfg.concurrency; output order is input
/// order.
GenRunStats generate_for_corpus(const std::filesystem::path& input,
                                const std::filesystem::path& output, PromptKind kind,
                                const GenClientConfig& cfg);

} // namespace narsal
