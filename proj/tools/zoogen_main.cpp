// zoogen: regenerates the bundled model files from the in-code builders.
#include <filesystem>
#include <iostream>

#include "oninfer/model_io.hpp"
#include "oninfer/zoo.hpp"

using namespace oninfer;

int main(int argc, char** argv) {
  if (argc != 2 || argv[1][0] == '-') {
    std::cerr << "usage: zoogen OUTDIR\n";
    return 2;
  }
  std::filesystem::path dir(argv[1]);
  std::filesystem::create_directories(dir);
  try {
    for (ZooModelId id : all_zoo_ids()) {
      ModelFile m = build_zoo_model(id);
      std::string base = (dir / zoo_id_name(id)).string();
      write_file(base + ".model", serialize_model_text(m));
      write_file_bytes(base + ".weights", serialize_weight_blob(m.graph));
      std::cout << base << ".model\n" << base << ".weights\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
