// Writes the mixture-masking fixture triple into the given directory:
// mm_x.sapp, mm_y.sapp, mm_spec.txt and mm_golden.sapp (loop reference).

#include <fstream>
#include <iostream>

#include "sapp/reference/masking.hpp"
#include "sapp/rng.hpp"
#include "sapp/tensor_io.hpp"

int main(int argc, char** argv) {
  if (argc != 2) {
    std::cerr << "usage: sapp_make_fixtures <dir>\n";
    return 2;
  }
  const std::filesystem::path dir = argv[1];
  std::filesystem::create_directories(dir);
  sapp::SeededRng rng(2020, 1);
  const sapp::Shape shape{1, 20, 16};
  sapp::FeatureTensor x(shape), y(shape);
  for (auto& v : x.data()) v = static_cast<float>(rng.normal());
  for (auto& v : y.data()) v = static_cast<float>(rng.normal());
  const sapp::MaskSpec spec{3, 5, 4, 6};
  sapp::tensor_write(dir / "mm_x.sapp", x);
  sapp::tensor_write(dir / "mm_y.sapp", y);
  sapp::tensor_write(dir / "mm_golden.sapp", sapp::reference::mixture_mask(x, y, spec));
  std::ofstream(dir / "mm_spec.txt") << sapp::to_string(spec) << '\n';
  return 0;
}
