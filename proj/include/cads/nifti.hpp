#pragma once

#include <array>
#include <cmath>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include <zlib.h>

#include "cads/grid.hpp"

namespace cads::nifti {

namespace detail {

#pragma pack(push, 1)
struct Header {
    int32_t sizeof_hdr;
    char data_type[10];
    char db_name[18];
    int32_t extents;
    int16_t session_error;
    char regular;
    char dim_info;
    int16_t dim[8];
    float intent_p1, intent_p2, intent_p3;
    int16_t intent_code;
    int16_t datatype;
    int16_t bitpix;
    int16_t slice_start;
    float pixdim[8];
    float vox_offset;
    float scl_slope;
    float scl_inter;
    int16_t slice_end;
    char slice_code;
    char xyzt_units;
    float cal_max, cal_min;
    float slice_duration;
    float toffset;
    int32_t glmax, glmin;
    char descrip[80];
    char aux_file[24];
    int16_t qform_code;
    int16_t sform_code;
    float quatern_b, quatern_c, quatern_d;
    float qoffset_x, qoffset_y, qoffset_z;
    float srow_x[4];
    float srow_y[4];
    float srow_z[4];
    char intent_name[16];
    char magic[4];
};
#pragma pack(pop)
static_assert(sizeof(Header) == 348, "NIfTI-1 header must be 348 bytes");

constexpr int16_t kDtUint8 = 2;
constexpr int16_t kDtInt16 = 4;
constexpr int16_t kDtFloat32 = 16;
constexpr int16_t kDtUint16 = 512;

inline bool is_gzip(const std::vector<unsigned char>& bytes) {
    return bytes.size() >= 2 && bytes[0] == 0x1F && bytes[1] == 0x8B;
}

inline std::vector<unsigned char> read_all(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in.good()) throw IoError("cannot open file: " + path);
    return std::vector<unsigned char>((std::istreambuf_iterator<char>(in)),
                                      std::istreambuf_iterator<char>());
}

inline std::vector<unsigned char> gunzip(const std::vector<unsigned char>& in,
                                         const std::string& path) {
    z_stream strm{};
    if (inflateInit2(&strm, 15 + 32) != Z_OK) throw IoError("zlib init failed");
    std::vector<unsigned char> out;
    out.reserve(in.size() * 4);
    std::array<unsigned char, 1 << 16> buf;
    strm.next_in = const_cast<unsigned char*>(in.data());
    strm.avail_in = static_cast<uInt>(in.size());
    int rc = Z_OK;
    while (rc != Z_STREAM_END) {
        strm.next_out = buf.data();
        strm.avail_out = static_cast<uInt>(buf.size());
        rc = inflate(&strm, Z_NO_FLUSH);
        if (rc != Z_OK && rc != Z_STREAM_END) {
            inflateEnd(&strm);
            throw CorruptFile("gzip decompression failed: " + path);
        }
        out.insert(out.end(), buf.data(), buf.data() + (buf.size() - strm.avail_out));
    }
    inflateEnd(&strm);
    return out;
}

inline std::vector<unsigned char> gzip_compress(const std::vector<unsigned char>& in) {
    z_stream strm{};
    if (deflateInit2(&strm, Z_DEFAULT_COMPRESSION, Z_DEFLATED, 15 + 16, 8,
                     Z_DEFAULT_STRATEGY) != Z_OK)
        throw IoError("zlib init failed");
    std::vector<unsigned char> out;
    std::array<unsigned char, 1 << 16> buf;
    strm.next_in = const_cast<unsigned char*>(in.data());
    strm.avail_in = static_cast<uInt>(in.size());
    int rc = Z_OK;
    while (rc != Z_STREAM_END) {
        strm.next_out = buf.data();
        strm.avail_out = static_cast<uInt>(buf.size());
        rc = deflate(&strm, Z_FINISH);
        out.insert(out.end(), buf.data(), buf.data() + (buf.size() - strm.avail_out));
    }
    deflateEnd(&strm);
    return out;
}

// Nearest signed permutation of a 3x3 direction matrix: greedy assignment of
// the largest |entries| to (world axis, index axis) pairs.
inline Orientation orientation_from_matrix(const double m[3][3]) {
    struct Entry {
        double mag;
        int world, axis;
    };
    std::vector<Entry> entries;
    for (int w = 0; w < 3; ++w)
        for (int a = 0; a < 3; ++a) entries.push_back({std::abs(m[w][a]), w, a});
    std::sort(entries.begin(), entries.end(), [](const Entry& x, const Entry& y) {
        if (x.mag != y.mag) return x.mag > y.mag;
        if (x.world != y.world) return x.world < y.world;
        return x.axis < y.axis;
    });
    bool world_used[3] = {false, false, false};
    bool axis_used[3] = {false, false, false};
    char letters[3] = {0, 0, 0};
    static const char pos[3] = {'R', 'A', 'S'};
    static const char neg[3] = {'L', 'P', 'I'};
    for (const auto& e : entries) {
        if (world_used[e.world] || axis_used[e.axis]) continue;
        world_used[e.world] = true;
        axis_used[e.axis] = true;
        letters[e.axis] = m[e.world][e.axis] >= 0 ? pos[e.world] : neg[e.world];
    }
    return Orientation::from_string(std::string(letters, 3));
}

struct Parsed {
    Header hdr;
    std::array<int, 3> dims;
    std::array<double, 3> spacing;
    Orientation orientation;
    std::array<double, 3> origin;
    const unsigned char* payload;
    std::size_t payload_size;
};

inline Parsed parse(const std::vector<unsigned char>& bytes, const std::string& path) {
    if (bytes.size() < sizeof(Header)) throw NotNifti("file too small for a NIfTI-1 header: " + path);
    Parsed p{};
    std::memcpy(&p.hdr, bytes.data(), sizeof(Header));
    const auto& h = p.hdr;
    if (std::memcmp(h.magic, "n+1", 4) != 0) throw NotNifti("bad NIfTI magic: " + path);
    if (h.sizeof_hdr != 348)
        throw CorruptFile("unsupported header layout (byte-swapped file?): " + path);
    if (h.dim[0] < 3 || h.dim[0] > 7) throw CorruptFile("expected a 3D volume: " + path);
    for (int a = 4; a <= h.dim[0]; ++a)
        if (h.dim[a] > 1) throw CorruptFile("volumes with a 4th dimension are not supported: " + path);

    for (int a = 0; a < 3; ++a) {
        p.dims[a] = h.dim[a + 1];
        if (p.dims[a] < 1) throw CorruptFile("non-positive dimension in header: " + path);
        p.spacing[a] = h.pixdim[a + 1];
        if (!(p.spacing[a] > 0)) throw CorruptFile("non-positive spacing in header: " + path);
    }

    // qform preferred over sform when both present
    double m[3][3] = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
    p.origin = {0, 0, 0};
    if (h.qform_code > 0) {
        const double b = h.quatern_b, c = h.quatern_c, d = h.quatern_d;
        double a2 = 1.0 - (b * b + c * c + d * d);
        const double a = a2 > 0 ? std::sqrt(a2) : 0.0;
        const double qfac = h.pixdim[0] < 0 ? -1.0 : 1.0;
        m[0][0] = a * a + b * b - c * c - d * d;
        m[0][1] = 2 * b * c - 2 * a * d;
        m[0][2] = (2 * b * d + 2 * a * c) * qfac;
        m[1][0] = 2 * b * c + 2 * a * d;
        m[1][1] = a * a + c * c - b * b - d * d;
        m[1][2] = (2 * c * d - 2 * a * b) * qfac;
        m[2][0] = 2 * b * d - 2 * a * c;
        m[2][1] = 2 * c * d + 2 * a * b;
        m[2][2] = (a * a + d * d - c * c - b * b) * qfac;
        p.origin = {h.qoffset_x, h.qoffset_y, h.qoffset_z};
    } else if (h.sform_code > 0) {
        const float* rows[3] = {h.srow_x, h.srow_y, h.srow_z};
        for (int w = 0; w < 3; ++w)
            for (int a = 0; a < 3; ++a) m[w][a] = rows[w][a];
        p.origin = {h.srow_x[3], h.srow_y[3], h.srow_z[3]};
    }
    p.orientation = orientation_from_matrix(m);

    std::size_t offset = static_cast<std::size_t>(h.vox_offset);
    if (offset < sizeof(Header)) offset = sizeof(Header);
    if (offset > bytes.size()) throw CorruptFile("vox_offset beyond end of file: " + path);
    p.payload = bytes.data() + offset;
    p.payload_size = bytes.size() - offset;
    return p;
}

inline std::size_t dtype_size(int16_t code, const std::string& path) {
    switch (code) {
        case kDtUint8: return 1;
        case kDtInt16: return 2;
        case kDtUint16: return 2;
        case kDtFloat32: return 4;
        default: throw UnsupportedDatatype(code);
    }
    (void)path;
}

inline void check_payload(const Parsed& p, const std::string& path) {
    const std::size_t n = static_cast<std::size_t>(p.dims[0]) * p.dims[1] * p.dims[2];
    const std::size_t need = n * dtype_size(p.hdr.datatype, path);
    if (p.payload_size < need)
        throw CorruptFile("truncated voxel payload (" + std::to_string(p.payload_size) + " of " +
                          std::to_string(need) + " bytes): " + path);
}

}  // namespace detail

inline ScalarGrid read_scalar(const std::string& path) {
    auto bytes = detail::read_all(path);
    if (detail::is_gzip(bytes)) bytes = detail::gunzip(bytes, path);
    const auto p = detail::parse(bytes, path);
    detail::check_payload(p, path);

    const std::size_t n = static_cast<std::size_t>(p.dims[0]) * p.dims[1] * p.dims[2];
    std::vector<float> out(n);
    const auto& h = p.hdr;
    switch (h.datatype) {
        case detail::kDtUint8:
            for (std::size_t i = 0; i < n; ++i) out[i] = p.payload[i];
            break;
        case detail::kDtInt16: {
            for (std::size_t i = 0; i < n; ++i) {
                int16_t v;
                std::memcpy(&v, p.payload + 2 * i, 2);
                out[i] = v;
            }
            break;
        }
        case detail::kDtUint16: {
            for (std::size_t i = 0; i < n; ++i) {
                uint16_t v;
                std::memcpy(&v, p.payload + 2 * i, 2);
                out[i] = v;
            }
            break;
        }
        case detail::kDtFloat32:
            std::memcpy(out.data(), p.payload, n * 4);
            break;
        default:
            throw UnsupportedDatatype(h.datatype);
    }
    if (h.scl_slope != 0.f && (h.scl_slope != 1.f || h.scl_inter != 0.f))
        for (auto& v : out) v = v * h.scl_slope + h.scl_inter;
    return ScalarGrid(p.dims, p.spacing, p.orientation, p.origin, std::move(out));
}

inline LabelGrid read_labels(const std::string& path) {
    auto bytes = detail::read_all(path);
    if (detail::is_gzip(bytes)) bytes = detail::gunzip(bytes, path);
    const auto p = detail::parse(bytes, path);
    detail::check_payload(p, path);

    const std::size_t n = static_cast<std::size_t>(p.dims[0]) * p.dims[1] * p.dims[2];
    std::vector<uint16_t> out(n);
    switch (p.hdr.datatype) {
        case detail::kDtUint8:
            for (std::size_t i = 0; i < n; ++i) out[i] = p.payload[i];
            break;
        case detail::kDtInt16: {
            for (std::size_t i = 0; i < n; ++i) {
                int16_t v;
                std::memcpy(&v, p.payload + 2 * i, 2);
                if (v < 0) throw CorruptFile("negative label value in " + path);
                out[i] = static_cast<uint16_t>(v);
            }
            break;
        }
        case detail::kDtUint16:
            std::memcpy(out.data(), p.payload, n * 2);
            break;
        default:
            // float payloads are not valid label carriers
            throw UnsupportedDatatype(p.hdr.datatype);
    }
    return LabelGrid(p.dims, p.spacing, p.orientation, p.origin, std::move(out));
}

namespace detail {

template <typename T>
void fill_header(Header& h, const VoxelGrid<T>& g, int16_t datatype, int16_t bitpix) {
    std::memset(&h, 0, sizeof h);
    h.sizeof_hdr = 348;
    h.regular = 'r';
    h.dim[0] = 3;
    for (int a = 0; a < 3; ++a) h.dim[a + 1] = static_cast<int16_t>(g.dims()[a]);
    for (int a = 4; a < 8; ++a) h.dim[a] = 1;
    h.datatype = datatype;
    h.bitpix = bitpix;
    h.pixdim[0] = 1.f;
    for (int a = 0; a < 3; ++a) h.pixdim[a + 1] = static_cast<float>(g.spacing()[a]);
    h.vox_offset = 352.f;
    h.scl_slope = 1.f;
    h.scl_inter = 0.f;
    h.xyzt_units = 2;  // millimetres
    h.sform_code = 1;
    h.qform_code = 0;
    float* rows[3] = {h.srow_x, h.srow_y, h.srow_z};
    for (int axis = 0; axis < 3; ++axis) {
        const int w = g.orientation().world_axis_of(axis);
        rows[w][axis] = static_cast<float>(g.orientation().sign_of(axis) * g.spacing()[axis]);
    }
    h.srow_x[3] = static_cast<float>(g.origin()[0]);
    h.srow_y[3] = static_cast<float>(g.origin()[1]);
    h.srow_z[3] = static_cast<float>(g.origin()[2]);
    std::memcpy(h.magic, "n+1", 4);
}

inline void write_bytes(const std::string& path, const std::vector<unsigned char>& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out.good()) throw IoError("cannot open file for writing: " + path);
    const bool gz = path.size() > 3 && path.compare(path.size() - 3, 3, ".gz") == 0;
    if (gz) {
        const auto z = gzip_compress(bytes);
        out.write(reinterpret_cast<const char*>(z.data()), static_cast<std::streamsize>(z.size()));
    } else {
        out.write(reinterpret_cast<const char*>(bytes.data()),
                  static_cast<std::streamsize>(bytes.size()));
    }
    if (!out.good()) throw IoError("write failed: " + path);
}

template <typename T, typename Raw>
void write_grid(const VoxelGrid<T>& g, const std::string& path, int16_t datatype) {
    Header h;
    fill_header(h, g, datatype, static_cast<int16_t>(sizeof(Raw) * 8));
    std::vector<unsigned char> bytes(352 + g.voxel_count() * sizeof(Raw), 0);
    std::memcpy(bytes.data(), &h, sizeof h);
    Raw* out = reinterpret_cast<Raw*>(bytes.data() + 352);
    for (std::size_t i = 0; i < g.voxel_count(); ++i) out[i] = static_cast<Raw>(g.values()[i]);
    write_bytes(path, bytes);
}

}  // namespace detail

// Scalars serialize as float32, labels as uint16; a ".gz" suffix selects the
// gzip container.
inline void write_nifti(const ScalarGrid& g, const std::string& path) {
    detail::write_grid<float, float>(g, path, detail::kDtFloat32);
}

inline void write_nifti(const LabelGrid& g, const std::string& path) {
    detail::write_grid<uint16_t, uint16_t>(g, path, detail::kDtUint16);
}

inline void write_nifti(const MaskGrid& g, const std::string& path) {
    // masks ride the label path as 0/1 uint16
    LabelGrid as_labels(g.dims(), g.spacing(), g.orientation(), g.origin(),
                        std::vector<uint16_t>(g.values().begin(), g.values().end()));
    write_nifti(as_labels, path);
}

inline MaskGrid read_mask(const std::string& path) {
    const auto labels = read_labels(path);
    std::vector<uint8_t> v(labels.voxel_count());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = labels.values()[i] ? 1 : 0;
    return MaskGrid(labels.dims(), labels.spacing(), labels.orientation(), labels.origin(),
                    std::move(v));
}

}  // namespace cads::nifti
