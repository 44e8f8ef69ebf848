#include "caada/checkpoint.hpp"

#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "caada/errors.hpp"
#include "caada/text_io.hpp"

namespace caada {

namespace {

constexpr const char* kMagic = "caada-checkpoint";
constexpr int kVersion = 1;

std::vector<std::string> split_ws(const std::string& line) {
    std::vector<std::string> out;
    std::istringstream in(line);
    std::string tok;
    while (in >> tok) out.push_back(tok);
    return out;
}

}  // namespace

void save_checkpoint(CaadaModel& model, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);  // binary: LF endings everywhere
    if (!out) throw DataError("checkpoint: cannot open " + path.string() + " for writing");

    const ArchSpec& arch = model.arch();
    out << kMagic << " " << kVersion << "\n";
    out << "mode " << (arch.mode == Mode::Da ? "da" : "dg") << "\n";
    out << "input_dim " << arch.input_dim << "\n";
    out << "num_classes " << arch.num_classes << "\n";
    out << "bottleneck_dim " << arch.bottleneck_dim << "\n";
    out << "extractor_hidden_dims";
    for (std::size_t h : arch.extractor_hidden_dims) out << " " << h;
    out << "\n";
    out << "discriminator_hidden_dim " << arch.discriminator_hidden_dim << "\n";
    out << "gamma " << format_double(arch.gamma) << "\n";
    out << "sigma " << format_double(arch.sigma) << "\n";

    auto named = model.named_parameters();
    out << "tensors " << named.size() << "\n";
    for (const auto& [name, param] : named) {
        out << "tensor " << name << " " << param->value.rows() << " "
            << param->value.cols() << "\n";
        for (std::size_t r = 0; r < param->value.rows(); ++r) {
            for (std::size_t c = 0; c < param->value.cols(); ++c) {
                if (c) out << " ";
                out << format_double(param->value(r, c));
            }
            out << "\n";
        }
    }
    out << "end\n";
    if (!out) throw DataError("checkpoint: write to " + path.string() + " failed");
}

CaadaModel load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("checkpoint: cannot open " + path.string());

    auto fail = [&](const std::string& why) -> void {
        throw DataError("checkpoint " + path.string() + ": " + why);
    };

    std::string line;
    auto next_line = [&]() {
        if (!std::getline(in, line)) fail("unexpected end of file");
        if (!line.empty() && line.back() == '\r') line.pop_back();
        return split_ws(line);
    };

    auto header = next_line();
    if (header.size() != 2 || header[0] != kMagic) fail("not a checkpoint file");
    long version = 0;
    if (!parse_long(header[1], version) || version != kVersion)
        fail("unsupported version " + header[1]);

    ArchSpec arch;
    auto expect_field = [&](const char* key, std::size_t min_values) {
        auto tokens = next_line();
        if (tokens.size() < 1 + min_values || tokens[0] != key)
            fail(std::string("expected field '") + key + "'");
        return tokens;
    };
    auto as_size = [&](const std::string& tok) {
        long v = 0;
        if (!parse_long(tok, v) || v < 0) fail("bad integer '" + tok + "'");
        return static_cast<std::size_t>(v);
    };

    {
        auto t = expect_field("mode", 1);
        if (t[1] == "da") arch.mode = Mode::Da;
        else if (t[1] == "dg") arch.mode = Mode::Dg;
        else fail("unknown mode '" + t[1] + "'");
    }
    arch.input_dim = as_size(expect_field("input_dim", 1)[1]);
    arch.num_classes = as_size(expect_field("num_classes", 1)[1]);
    arch.bottleneck_dim = as_size(expect_field("bottleneck_dim", 1)[1]);
    {
        auto t = expect_field("extractor_hidden_dims", 0);
        for (std::size_t i = 1; i < t.size(); ++i)
            arch.extractor_hidden_dims.push_back(as_size(t[i]));
    }
    arch.discriminator_hidden_dim = as_size(expect_field("discriminator_hidden_dim", 1)[1]);
    if (!parse_double(expect_field("gamma", 1)[1], arch.gamma)) fail("bad gamma");
    if (!parse_double(expect_field("sigma", 1)[1], arch.sigma)) fail("bad sigma");

    const std::size_t tensor_count = as_size(expect_field("tensors", 1)[1]);

    CaadaModel model = CaadaModel::with_zero_parameters(arch);
    std::map<std::string, Parameter*> by_name;
    for (auto& [name, param] : model.named_parameters()) by_name[name] = param;
    if (by_name.size() != tensor_count)
        fail("tensor count " + std::to_string(tensor_count) + " does not match architecture");

    std::size_t loaded = 0;
    while (true) {
        auto tokens = next_line();
        if (tokens.size() == 1 && tokens[0] == "end") break;
        if (tokens.size() != 4 || tokens[0] != "tensor") fail("expected tensor record");
        auto it = by_name.find(tokens[1]);
        if (it == by_name.end()) fail("unknown tensor '" + tokens[1] + "'");
        Parameter& param = *it->second;
        const std::size_t rows = as_size(tokens[2]);
        const std::size_t cols = as_size(tokens[3]);
        if (rows != param.value.rows() || cols != param.value.cols())
            fail("tensor '" + tokens[1] + "' has shape " + tokens[2] + "x" + tokens[3] +
                 ", expected " + param.value.shape_str());
        for (std::size_t r = 0; r < rows; ++r) {
            auto values = next_line();
            if (values.size() != cols)
                fail("tensor '" + tokens[1] + "' row " + std::to_string(r) +
                     " has " + std::to_string(values.size()) + " values");
            for (std::size_t c = 0; c < cols; ++c) {
                double v = 0.0;
                if (!parse_double(values[c], v))
                    fail("tensor '" + tokens[1] + "': bad value '" + values[c] + "'");
                param.value(r, c) = v;
            }
        }
        ++loaded;
    }
    if (loaded != tensor_count)
        fail("found " + std::to_string(loaded) + " tensors, header says " +
             std::to_string(tensor_count));
    return model;
}

}  // namespace caada
