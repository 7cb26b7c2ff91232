#include "factcheck/encoders.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "factcheck/common.hpp"

namespace factcheck {

namespace {

constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;
constexpr std::size_t kBucketsPerToken = 4;
constexpr std::size_t kPatchesPerImage = 4;

// Unit vector along a hash-chosen axis, used when a sum cancels to zero.
Vec fallback_axis(std::uint64_t h, std::size_t d) {
    Vec v(d, 0.0);
    v[h % d] = 1.0;
    return v;
}

}  // namespace

StubBackend::StubBackend(const BackendDescriptor& descriptor) : descriptor_(descriptor) {
    if (descriptor_.dim == 0) throw ShapeMismatch("backend dimension must be positive");
    base_ = splitmix64(descriptor_.seed ^ fnv1a(descriptor_.name) ^
                       (kGolden * static_cast<std::uint64_t>(descriptor_.dim)));
}

Vec StubBackend::token_vector(std::string_view token) const {
    const std::size_t d = descriptor_.dim;
    Vec v(d, 0.0);
    const std::uint64_t th = fnv1a(token) ^ base_;
    for (std::size_t k = 0; k < kBucketsPerToken; ++k) {
        const std::uint64_t h = splitmix64(th + (k + 1) * kGolden);
        const std::size_t bucket = static_cast<std::size_t>(h % d);
        const double sign = ((h >> 32) & 1u) ? 1.0 : -1.0;
        v[bucket] += sign;
    }
    return v;
}

Vec StubBackend::bytes_vector(const std::uint8_t* data, std::size_t size) const {
    const std::size_t d = descriptor_.dim;
    const std::uint64_t bh = fnv1a(data, size) ^ base_;
    Vec v(d);
    for (std::size_t i = 0; i < d; ++i) {
        const std::uint64_t h = splitmix64(bh + (i + 1) * kGolden);
        v[i] = 2.0 * (static_cast<double>(h >> 11) * 0x1.0p-53) - 1.0;
    }
    normalize_in_place(v);
    return v;
}

Vec StubBackend::embed_text(std::string_view text) const {
    const auto tokens = split_whitespace(text);
    Vec sum(descriptor_.dim, 0.0);
    for (const std::string& tok : tokens) {
        const Vec tv = token_vector(tok);
        for (std::size_t i = 0; i < sum.size(); ++i) sum[i] += tv[i];
    }
    if (norm(sum) < 1e-12) {
        sum = fallback_axis(fnv1a(text) ^ base_, descriptor_.dim);
    }
    normalize_in_place(sum);
    return sum;
}

Vec StubBackend::embed_image(const std::vector<std::uint8_t>& bytes) const {
    if (bytes.empty()) throw UnreadableImage("empty image payload");
    return bytes_vector(bytes.data(), bytes.size());
}

Mat StubBackend::encode_tokens(std::string_view text) const {
    const auto tokens = split_whitespace(text);
    Mat out(tokens.size(), descriptor_.dim);
    for (std::size_t t = 0; t < tokens.size(); ++t) {
        Vec tv = token_vector(tokens[t]);
        if (norm(tv) < 1e-12) tv = fallback_axis(fnv1a(tokens[t]) ^ base_, descriptor_.dim);
        normalize_in_place(tv);
        for (std::size_t i = 0; i < tv.size(); ++i) out.at(t, i) = tv[i];
    }
    return out;
}

Mat StubBackend::encode_image_patches(const std::vector<std::uint8_t>& bytes) const {
    if (bytes.empty()) throw UnreadableImage("empty image payload");
    const std::size_t patches = std::min(kPatchesPerImage, bytes.size());
    Mat out(patches, descriptor_.dim);
    for (std::size_t p = 0; p < patches; ++p) {
        const std::size_t begin = p * bytes.size() / patches;
        const std::size_t end = (p + 1) * bytes.size() / patches;
        const Vec pv = bytes_vector(bytes.data() + begin, end - begin);
        for (std::size_t i = 0; i < pv.size(); ++i) out.at(p, i) = pv[i];
    }
    return out;
}

double StubBackend::cross_score(std::string_view claim, std::string_view candidate) const {
    return cosine_similarity(embed_text(claim), embed_text(candidate));
}

std::unique_ptr<EncoderBackend> make_backend(const BackendDescriptor& descriptor) {
    switch (descriptor.kind) {
        case BackendKind::Stub:
            return std::make_unique<StubBackend>(descriptor);
        case BackendKind::External:
            throw BackendUnavailable("external backend '" + descriptor.name +
                                     "' is not installed in this build");
    }
    throw BackendUnavailable("unknown backend kind");
}

namespace {

Mat take_rows(const Mat& m, std::size_t count) {
    Mat out(count, m.cols);
    for (std::size_t r = 0; r < count; ++r)
        for (std::size_t c = 0; c < m.cols; ++c) out.at(r, c) = m.at(r, c);
    return out;
}

}  // namespace

ClaimEvidenceEncoding encode_token_sequence(std::string_view claim,
                                            const std::vector<std::string>& text_evidence,
                                            const std::vector<std::vector<std::uint8_t>>& image_evidence,
                                            const EncoderBackend& backend) {
    ClaimEvidenceEncoding out;
    out.claim = backend.encode_tokens(claim);

    const std::size_t budget = backend.max_sequence_length();
    std::size_t used = std::min(out.claim.rows, budget);

    auto push = [&](Mat m, std::vector<Mat>& sink) {
        if (used >= budget) return;
        const std::size_t room = budget - used;
        if (m.rows > room) m = take_rows(m, room);
        if (m.rows == 0) return;
        used += m.rows;
        sink.push_back(std::move(m));
    };

    for (const std::string& item : text_evidence) {
        push(backend.encode_tokens(item), out.text_evidence);
    }
    for (const auto& bytes : image_evidence) {
        push(backend.encode_image_patches(bytes), out.image_evidence);
    }
    return out;
}

void EmbeddingCache::put(std::string key, Vec embedding) {
    entries_[std::move(key)] = std::move(embedding);
}

const Vec* EmbeddingCache::get(std::string_view key) const {
    auto it = entries_.find(std::string(key));
    return it == entries_.end() ? nullptr : &it->second;
}

EmbeddingCache EmbeddingCache::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw MissingEmbedding("cannot open embedding cache " + path.string());
    EmbeddingCache cache;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::istringstream fields(line);
        std::string key;
        std::size_t d = 0;
        if (!(fields >> key >> d)) {
            throw MissingEmbedding("embedding cache " + path.string() + ":" +
                                   std::to_string(line_no) + ": bad header fields");
        }
        Vec v(d);
        for (std::size_t i = 0; i < d; ++i) {
            if (!(fields >> v[i])) {
                throw MissingEmbedding("embedding cache " + path.string() + ":" +
                                       std::to_string(line_no) + ": truncated vector");
            }
        }
        cache.put(std::move(key), std::move(v));
    }
    return cache;
}

void EmbeddingCache::save(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw MissingEmbedding("cannot write embedding cache " + path.string());
    out.precision(17);
    std::vector<const std::string*> keys;
    keys.reserve(entries_.size());
    for (const auto& [key, _] : entries_) keys.push_back(&key);
    std::sort(keys.begin(), keys.end(), [](const auto* a, const auto* b) { return *a < *b; });
    for (const auto* key : keys) {
        const Vec& v = entries_.at(*key);
        out << *key << ' ' << v.size();
        for (double x : v) out << ' ' << x;
        out << '\n';
    }
}

}  // namespace factcheck
