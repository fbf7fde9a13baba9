#include <gsopt/core/errors.hpp>
#include <gsopt/io/ply.hpp>

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <vector>

namespace gsopt {

static_assert(std::endian::native == std::endian::little, "PLY I/O assumes a little-endian host");

namespace {

std::vector<std::string> property_names(int sh_degree) {
    std::vector<std::string> names = {"x", "y", "z", "nx", "ny", "nz", "f_dc_0", "f_dc_1", "f_dc_2"};
    const int rest = 3 * (sh_basis_count(sh_degree) - 1);
    for (int k = 0; k < rest; ++k) {
        names.push_back("f_rest_" + std::to_string(k));
    }
    names.insert(names.end(), {"opacity", "scale_0", "scale_1", "scale_2", "rot_0", "rot_1", "rot_2", "rot_3"});
    return names;
}

struct Property {
    std::string name;
    int bytes = 4;
    bool is_double = false;
};

} // namespace

void save_ply(const GaussianCloud &cloud, const std::string &path) {
    cloud.validate();
    const auto names = property_names(cloud.sh_degree);
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw FormatError("cannot open '" + path + "' for writing");
    }
    out << "ply\nformat binary_little_endian 1.0\nelement vertex " << cloud.size() << '\n';
    for (const auto &n : names) {
        out << "property float " << n << '\n';
    }
    out << "end_header\n";

    const int basis = cloud.sh_basis();
    std::vector<float> row(names.size());
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        std::size_t k = 0;
        for (int a = 0; a < 3; ++a) {
            row[k++] = static_cast<float>(cloud.positions[i][a]);
        }
        for (int a = 0; a < 3; ++a) {
            row[k++] = 0.0f;
        }
        const auto sh = cloud.sh_of(i);
        for (int c = 0; c < 3; ++c) {
            row[k++] = static_cast<float>(sh[c]);
        }
        // f_rest is channel-major on disk.
        for (int c = 0; c < 3; ++c) {
            for (int b = 1; b < basis; ++b) {
                row[k++] = static_cast<float>(sh[3 * b + c]);
            }
        }
        row[k++] = static_cast<float>(cloud.opacity_logits[i]);
        for (int a = 0; a < 3; ++a) {
            row[k++] = static_cast<float>(std::log(cloud.sizes[i][a]));
        }
        for (int a = 0; a < 4; ++a) {
            row[k++] = static_cast<float>(cloud.rotations[i][a]);
        }
        out.write(reinterpret_cast<const char *>(row.data()), static_cast<std::streamsize>(row.size() * sizeof(float)));
    }
    if (!out) {
        throw FormatError("failed writing '" + path + "'");
    }
}

GaussianCloud load_ply(const std::string &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw FormatError("cannot open '" + path + "'");
    }
    std::string line;
    if (!std::getline(in, line) || line != "ply") {
        throw FormatError("'" + path + "' is not a PLY file");
    }
    std::size_t count = 0;
    bool in_vertex = false, seen_vertex = false, seen_format = false;
    std::vector<Property> props;
    while (true) {
        if (!std::getline(in, line)) {
            throw FormatError("PLY '" + path + "': header not terminated");
        }
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        std::istringstream ls(line);
        std::string word;
        ls >> word;
        if (word == "end_header") {
            break;
        }
        if (word == "comment" || word == "obj_info" || word.empty()) {
            continue;
        }
        if (word == "format") {
            std::string fmt;
            ls >> fmt;
            if (fmt != "binary_little_endian") {
                throw FormatError("PLY '" + path + "': unsupported format '" + fmt + "'");
            }
            seen_format = true;
        } else if (word == "element") {
            std::string name;
            std::size_t n = 0;
            ls >> name >> n;
            if (seen_vertex) {
                in_vertex = false;
                continue;
            }
            if (name != "vertex") {
                if (n != 0) {
                    throw FormatError("PLY '" + path + "': element '" + name + "' precedes the vertex element");
                }
                continue;
            }
            in_vertex = seen_vertex = true;
            count = n;
        } else if (word == "property") {
            if (!in_vertex) {
                continue;
            }
            std::string type, name;
            ls >> type >> name;
            Property p{name};
            if (type == "float" || type == "float32") {
                p.bytes = 4;
            } else if (type == "double" || type == "float64") {
                p.bytes = 8;
                p.is_double = true;
            } else {
                throw FormatError("PLY '" + path + "': property '" + name + "' has unsupported type '" + type + "'");
            }
            props.push_back(p);
        } else {
            throw FormatError("PLY '" + path + "': unexpected header line '" + line + "'");
        }
    }
    if (!seen_format || !seen_vertex) {
        throw FormatError("PLY '" + path + "': missing format or vertex element");
    }

    std::map<std::string, std::size_t> column;
    std::vector<std::size_t> offset(props.size());
    std::size_t stride = 0;
    for (std::size_t k = 0; k < props.size(); ++k) {
        column[props[k].name] = k;
        offset[k] = stride;
        stride += props[k].bytes;
    }
    int rest = 0;
    while (column.count("f_rest_" + std::to_string(rest))) {
        ++rest;
    }
    int degree = -1;
    for (int d = 0; d <= 3; ++d) {
        if (3 * (sh_basis_count(d) - 1) == rest) {
            degree = d;
        }
    }
    if (degree < 0) {
        throw FormatError("PLY '" + path + "': " + std::to_string(rest) + " f_rest properties do not match any SH degree");
    }
    const auto names = property_names(degree);
    std::vector<std::size_t> col(names.size());
    for (std::size_t k = 0; k < names.size(); ++k) {
        if (names[k] == "nx" || names[k] == "ny" || names[k] == "nz") {
            continue;
        }
        const auto it = column.find(names[k]);
        if (it == column.end()) {
            throw FormatError("PLY '" + path + "': missing property '" + names[k] + "'");
        }
        col[k] = it->second;
    }

    std::vector<char> data(stride * count);
    in.read(data.data(), static_cast<std::streamsize>(data.size()));
    if (static_cast<std::size_t>(in.gcount()) != data.size()) {
        throw FormatError("PLY '" + path + "': truncated vertex data");
    }
    auto value = [&](std::size_t i, std::size_t k) {
        const char *p = data.data() + i * stride + offset[col[k]];
        double v;
        if (props[col[k]].is_double) {
            std::memcpy(&v, p, 8);
        } else {
            float f;
            std::memcpy(&f, p, 4);
            v = f;
        }
        if (!std::isfinite(v)) {
            throw FormatError("PLY '" + path + "': non-finite '" + names[k] + "' at vertex " + std::to_string(i));
        }
        return v;
    };

    GaussianCloud cloud(degree, count);
    const int basis = cloud.sh_basis();
    for (std::size_t i = 0; i < count; ++i) {
        std::size_t k = 0;
        for (int a = 0; a < 3; ++a) {
            cloud.positions[i][a] = value(i, k++);
        }
        k += 3;
        auto sh = cloud.sh_of(i);
        for (int c = 0; c < 3; ++c) {
            sh[c] = value(i, k++);
        }
        for (int c = 0; c < 3; ++c) {
            for (int b = 1; b < basis; ++b) {
                sh[3 * b + c] = value(i, k++);
            }
        }
        cloud.opacity_logits[i] = value(i, k++);
        for (int a = 0; a < 3; ++a) {
            cloud.sizes[i][a] = std::exp(value(i, k++));
        }
        for (int a = 0; a < 4; ++a) {
            cloud.rotations[i][a] = value(i, k++);
        }
    }
    cloud.validate();
    return cloud;
}

} // namespace gsopt
