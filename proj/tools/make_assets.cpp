// Regenerates the committed default extractor weights from their fixed seeds.
#include <cstdio>
#include <filesystem>

#include "cycpl/error.hpp"
#include "cycpl/nets/extractor.hpp"

int main(int argc, char** argv) {
  if (argc != 2) {
    std::fprintf(stderr, "usage: %s <asset-dir>\n", argv[0]);
    return 2;
  }
  try {
    const std::filesystem::path dir = argv[1];
    std::filesystem::create_directories(dir);
    for (int dims : {2, 3}) {
      const auto fx = cycpl::nets::make_tiny_extractor(
          dims, cycpl::nets::kDefaultExtractorSeed + static_cast<std::uint64_t>(dims));
      const auto path = dir / (dims == 2 ? "tiny_vgg2d.cpwt" : "tiny_vgg3d.cpwt");
      cycpl::nets::save_weights(fx.weights(), path);
      std::printf("wrote %s\n", path.string().c_str());
    }
  } catch (const cycpl::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  }
  return 0;
}
