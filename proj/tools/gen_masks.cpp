// Regenerates the shipped mask crops from the corpus element atlas.
// The committed files in data/masks are locked by a unit test; run this after
// changing an element design and commit the result.

#include <cstdio>
#include <filesystem>

#include "gtrm/corpus.hpp"
#include "gtrm/image_io.hpp"

int main(int argc, char** argv) {
    using namespace gtrm;
    const std::filesystem::path root = argc > 1 ? argv[1] : "data/masks";
    try {
        std::filesystem::create_directories(root / "occlude");
        std::filesystem::create_directories(root / "demetrify");
        io::write_pam(root / "occlude" / "stories_bar.pam",
                      corpus::element_base(corpus::ElementKind::StoriesBar, 0));
        io::write_pam(root / "occlude" / "badge.pam",
                      corpus::element_base(corpus::ElementKind::Badge, 0));
        io::write_pam(root / "demetrify" / "metrics_bar.pam",
                      corpus::element_base(corpus::ElementKind::MetricsBar, 0));
    } catch (const std::exception& e) {
        std::fprintf(stderr, "gen_masks: %s\n", e.what());
        return 1;
    }
    std::printf("masks written under %s\n", root.string().c_str());
    return 0;
}
