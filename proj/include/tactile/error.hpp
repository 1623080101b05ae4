#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace tactile {

enum class Errc {
    invalid_config,
    marker_out_of_bounds,
    count_mismatch,
    dimension_mismatch,
    insufficient_valid_flow,
    degenerate_design,
    shape_mismatch,
    no_slip_below_cap,
    oversize_payload,
    bad_magic,
    bad_version,
    truncated,
    crc_mismatch,
    oversize,
    malformed_payload,
    disconnected,
    io_error,
    parse_error,
};

constexpr std::string_view to_string(Errc e) noexcept {
    switch (e) {
        case Errc::invalid_config: return "invalid-config";
        case Errc::marker_out_of_bounds: return "marker-out-of-bounds";
        case Errc::count_mismatch: return "count-mismatch";
        case Errc::dimension_mismatch: return "dimension-mismatch";
        case Errc::insufficient_valid_flow: return "insufficient-valid-flow";
        case Errc::degenerate_design: return "degenerate-design";
        case Errc::shape_mismatch: return "shape-mismatch";
        case Errc::no_slip_below_cap: return "no-slip-below-cap";
        case Errc::oversize_payload: return "oversize-payload";
        case Errc::bad_magic: return "bad-magic";
        case Errc::bad_version: return "bad-version";
        case Errc::truncated: return "truncated";
        case Errc::crc_mismatch: return "crc-mismatch";
        case Errc::oversize: return "oversize";
        case Errc::malformed_payload: return "malformed-payload";
        case Errc::disconnected: return "disconnected";
        case Errc::io_error: return "io-error";
        case Errc::parse_error: return "parse-error";
    }
    return "unknown";
}

/// Exception carrying one of the library's error kinds.
class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    Errc code() const noexcept { return code_; }

private:
    Errc code_;
};

}  // namespace tactile
