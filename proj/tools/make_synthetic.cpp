// Writes a synthetic image store (and optionally a matching text store)
// with one orthogonal prototype per class plus Gaussian noise.

#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "fewshot/synthetic.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Generate synthetic embedding stores"};
  fewshot::synthetic::PrototypeSpec spec;
  std::string image_out;
  std::string text_out;
  std::size_t templates = 3;
  double text_sigma = -1.0;
  app.add_option("--classes", spec.num_classes, "Number of classes");
  app.add_option("--items", spec.items_per_class, "Images per class");
  app.add_option("--dim", spec.dim, "Embedding dimension (>= classes)");
  app.add_option("--sigma", spec.noise_sigma, "Per-component noise for image rows");
  app.add_option("--text-sigma", text_sigma, "Per-component noise for text rows (default: --sigma)");
  app.add_option("--templates", templates, "Prompt templates per class");
  app.add_option("--seed", spec.seed, "Generator seed");
  app.add_option("--dataset", spec.dataset_name, "Dataset name recorded in the stores");
  app.add_option("--image-out", image_out, "Image store path")->required();
  app.add_option("--text-out", text_out, "Text store path");
  CLI11_PARSE(app, argc, argv);

  try {
    fewshot::write_store(fewshot::synthetic::prototype_image_store(spec), image_out);
    if (!text_out.empty()) {
      auto text_spec = spec;
      if (text_sigma >= 0.0) text_spec.noise_sigma = text_sigma;
      fewshot::write_store(fewshot::synthetic::prototype_text_store(text_spec, templates), text_out);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
