#include "mcf/snapshot.hpp"

#include "mcf/error.hpp"
#include "mcf/text.hpp"

#include <fstream>
#include <sstream>

namespace mcf {

namespace {

const char* kModule = "graph-state";

class Cursor {
public:
    explicit Cursor(std::string_view text) : text_(text) {}

    bool done() const { return pos_ >= text_.size(); }
    std::size_t offset() const { return pos_; }

    // Next line without its terminator; throws when the input is exhausted.
    std::string_view line(const char* expecting) {
        if (done()) {
            throw FormatError(kModule, std::string("unexpected end of snapshot, expected ") + expecting, pos_);
        }
        const auto end = text_.find('\n', pos_);
        const auto stop = end == std::string_view::npos ? text_.size() : end;
        auto out = text_.substr(pos_, stop - pos_);
        if (!out.empty() && out.back() == '\r') {
            out.remove_suffix(1);
        }
        line_start_ = pos_;
        pos_ = end == std::string_view::npos ? text_.size() : end + 1;
        return out;
    }

    std::size_t line_start() const { return line_start_; }

private:
    std::string_view text_;
    std::size_t pos_ = 0;
    std::size_t line_start_ = 0;
};

std::string_view header_value(Cursor& cursor, std::string_view key) {
    const auto text = cursor.line(std::string(key).c_str());
    if (text.size() <= key.size() || text.substr(0, key.size()) != key || text[key.size()] != '=') {
        throw FormatError(kModule, "expected header '" + std::string(key) + "='", cursor.line_start());
    }
    return text.substr(key.size() + 1);
}

ManifoldSpec parse_manifold(std::string_view text, std::size_t offset) {
    try {
        return ManifoldSpec::parse(std::string(text));
    } catch (const Error& e) {
        throw FormatError(kModule, std::string("bad manifold header: ") + e.what(), offset);
    }
}

} // namespace

void snapshot_write(const FlowState& state, std::ostream& out) {
    const auto& field = state.field;
    const auto& grid = *field.grid;
    out << "manifold1=" << grid.spec().to_string() << '\n';
    out << "manifold2=" << field.target.to_string() << '\n';
    out << "shape=";
    for (std::size_t a = 0; a < grid.shape().size(); ++a) {
        out << (a ? "," : "") << grid.shape()[a];
    }
    out << '\n';
    out << "time=" << format_double(state.time) << '\n';
    out << "step=" << state.step_index << '\n';
    const int c = field.components();
    for (std::size_t node = 0; node < field.size(); ++node) {
        const auto v = field.at(node);
        for (int k = 0; k < c; ++k) {
            out << (k ? " " : "") << format_double(v[k]);
        }
        out << '\n';
    }
}

void snapshot_write_file(const FlowState& state, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw IoError(kModule, "cannot open snapshot for writing: " + path.string());
    }
    snapshot_write(state, out);
    out.flush();
    if (!out) {
        throw IoError(kModule, "failed writing snapshot: " + path.string());
    }
}

FlowState snapshot_read(std::string_view text) {
    Cursor cursor(text);
    const auto m1_text = header_value(cursor, "manifold1");
    const auto domain = parse_manifold(m1_text, cursor.line_start());
    const auto m2_text = header_value(cursor, "manifold2");
    const auto target = parse_manifold(m2_text, cursor.line_start());
    if (target.dim != kTargetDim) {
        throw FormatError(kModule, "target manifold must be two-dimensional", cursor.line_start());
    }

    const auto shape_text = header_value(cursor, "shape");
    std::vector<int> shape;
    for (auto part : split(shape_text, ',')) {
        const auto value = parse_integer(part);
        if (!value || *value <= 0 || *value > (1 << 20)) {
            throw FormatError(kModule, "bad grid shape '" + std::string(shape_text) + "'", cursor.line_start());
        }
        shape.push_back(static_cast<int>(*value));
    }

    const auto time_text = header_value(cursor, "time");
    const auto time = parse_double(time_text);
    if (!time || !(*time >= 0.0)) {
        throw FormatError(kModule, "bad time '" + std::string(time_text) + "'", cursor.line_start());
    }
    const auto step_text = header_value(cursor, "step");
    const auto step = parse_integer(step_text);
    if (!step || *step < 0) {
        throw FormatError(kModule, "bad step '" + std::string(step_text) + "'", cursor.line_start());
    }

    std::shared_ptr<const Grid> grid;
    try {
        grid = std::make_shared<const Grid>(domain, shape);
    } catch (const Error& e) {
        throw FormatError(kModule, std::string("header describes no valid grid: ") + e.what(), 0);
    }

    FlowState state;
    state.time = *time;
    state.step_index = *step;
    state.field = MapField(grid, target);
    const int c = state.field.components();
    for (std::size_t node = 0; node < grid->size(); ++node) {
        if (cursor.done()) {
            throw FormatError(kModule,
                              "value count mismatch: header shape needs " + std::to_string(grid->size()) +
                                  " rows, found " + std::to_string(node),
                              cursor.offset());
        }
        const auto row = cursor.line("value row");
        std::size_t k = 0;
        std::size_t pos = 0;
        auto out = state.field.at(node);
        while (pos < row.size()) {
            while (pos < row.size() && row[pos] == ' ') {
                ++pos;
            }
            if (pos >= row.size()) {
                break;
            }
            auto end = row.find(' ', pos);
            if (end == std::string_view::npos) {
                end = row.size();
            }
            const auto token = row.substr(pos, end - pos);
            const auto value = parse_double(token);
            if (!value) {
                throw FormatError(kModule, "bad number '" + std::string(token) + "'", cursor.line_start() + pos);
            }
            if (k >= static_cast<std::size_t>(c)) {
                throw FormatError(kModule, "too many components in row " + std::to_string(node),
                                  cursor.line_start() + pos);
            }
            out[k++] = *value;
            pos = end;
        }
        if (k != static_cast<std::size_t>(c)) {
            throw FormatError(kModule,
                              "row " + std::to_string(node) + " has " + std::to_string(k) + " components, expected " +
                                  std::to_string(c),
                              cursor.line_start());
        }
    }
    while (!cursor.done()) {
        const auto extra = cursor.line("end");
        if (!trim(extra).empty()) {
            throw FormatError(kModule,
                              "value count mismatch: more rows than the header shape allows (" +
                                  std::to_string(grid->size()) + ")",
                              cursor.line_start());
        }
    }
    return state;
}

FlowState snapshot_read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError(kModule, "cannot open snapshot: " + path.string());
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return snapshot_read(std::string_view(buffer.str()));
}

} // namespace mcf
