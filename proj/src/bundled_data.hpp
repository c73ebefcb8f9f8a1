#pragma once

#include <span>
#include <string_view>

namespace epd::detail {

struct BundledFile {
  std::string_view name;
  std::string_view csv;
};

std::span<const BundledFile> bundled_files();

}  // namespace epd::detail
