#include "sinpaint/nn/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace sinpaint::nn {

namespace {

constexpr std::string_view kMetaPrefix = "__meta__.";

static_assert(std::endian::native == std::endian::little,
              "the container writer assumes a little-endian host");

void write_u64(std::string& out, std::uint64_t v) {
    char buf[8];
    std::memcpy(buf, &v, 8);
    out.append(buf, 8);
}

class Reader {
public:
    Reader(const std::string& bytes, const std::string& origin) : bytes_(bytes), origin_(origin) {}
    bool done() const { return pos_ == bytes_.size(); }
    std::uint64_t u64() {
        std::uint64_t v;
        std::memcpy(&v, take(8), 8);
        return v;
    }
    const char* take(std::size_t n) {
        if (bytes_.size() - pos_ < n) {
            throw std::runtime_error(origin_ + ": truncated tensor container at byte " +
                                     std::to_string(pos_));
        }
        const char* p = bytes_.data() + pos_;
        pos_ += n;
        return p;
    }
    std::size_t remaining() const { return bytes_.size() - pos_; }

private:
    const std::string& bytes_;
    const std::string& origin_;
    std::size_t pos_ = 0;
};

}  // namespace

void TensorFile::put(const std::string& name, const Tensor& tensor) {
    put(name, tensor.shape(), std::vector<float>(tensor.data().begin(), tensor.data().end()));
}

void TensorFile::put(const std::string& name, const Shape& shape, std::vector<float> values) {
    if (values.size() != shape_numel(shape)) {
        throw std::invalid_argument("TensorFile::put(" + name + "): value count does not match shape");
    }
    auto it = index_.find(name);
    if (it != index_.end()) {
        records_[it->second] = Record{name, shape, std::move(values)};
        return;
    }
    index_[name] = records_.size();
    records_.push_back(Record{name, shape, std::move(values)});
}

void TensorFile::put_text(const std::string& key, const std::string& text) {
    std::vector<float> v;
    v.reserve(text.size());
    for (unsigned char c : text) v.push_back(static_cast<float>(c));
    put(std::string(kMetaPrefix) + key, Shape{text.size()}, std::move(v));
}

bool TensorFile::contains(const std::string& name) const { return index_.count(name) != 0; }

Tensor TensorFile::get(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw std::out_of_range("tensor container has no record '" + name + "'");
    const auto& r = records_[it->second];
    return Tensor(r.shape, r.values);
}

std::optional<std::string> TensorFile::text(const std::string& key) const {
    auto it = index_.find(std::string(kMetaPrefix) + key);
    if (it == index_.end()) return std::nullopt;
    std::string s;
    for (float f : records_[it->second].values) s.push_back(static_cast<char>(static_cast<int>(f)));
    return s;
}

std::vector<std::string> TensorFile::names() const {
    std::vector<std::string> out;
    for (const auto& r : records_) out.push_back(r.name);
    return out;
}

std::string TensorFile::serialize() const {
    std::string out(kMagic);
    for (const auto& r : records_) {
        write_u64(out, r.name.size());
        out += r.name;
        write_u64(out, r.shape.size());
        for (auto d : r.shape) write_u64(out, d);
        out.append(reinterpret_cast<const char*>(r.values.data()), r.values.size() * sizeof(float));
    }
    return out;
}

TensorFile TensorFile::deserialize(const std::string& bytes, const std::string& origin) {
    if (bytes.compare(0, kMagic.size(), kMagic) != 0) {
        throw std::runtime_error(origin + ": not a tensor container (missing SPTN1 header)");
    }
    TensorFile file;
    Reader rd(bytes, origin);
    rd.take(kMagic.size());
    while (!rd.done()) {
        const auto name_len = rd.u64();
        if (name_len > rd.remaining()) throw std::runtime_error(origin + ": corrupt record name length");
        std::string name(rd.take(name_len), name_len);
        const auto rank = rd.u64();
        if (rank > 16) throw std::runtime_error(origin + ": corrupt rank for record '" + name + "'");
        Shape shape(rank);
        std::size_t count = 1;
        for (auto& d : shape) {
            d = rd.u64();
            if (d != 0 && count > rd.remaining() / d) {
                throw std::runtime_error(origin + ": corrupt dims for record '" + name + "'");
            }
            count *= d;
        }
        if (count > rd.remaining() / sizeof(float)) {
            throw std::runtime_error(origin + ": truncated data for record '" + name + "'");
        }
        std::vector<float> values(count);
        std::memcpy(values.data(), rd.take(count * sizeof(float)), count * sizeof(float));
        file.put(name, shape, std::move(values));
    }
    return file;
}

void TensorFile::save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    const auto bytes = serialize();
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("failed writing " + path.string());
}

TensorFile TensorFile::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return deserialize(ss.str(), path.string());
}

}  // namespace sinpaint::nn
