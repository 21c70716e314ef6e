#include "dreamsplat/eval.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include <json.hpp>

namespace dreamsplat {

double mse(const ImageBuffer &a, const ImageBuffer &b, const MaskBuffer *mask) {
  if (!a.same_shape(b))
    throw std::invalid_argument("mse: image dimensions differ");
  if (mask && !mask->matches(a))
    throw std::invalid_argument("mse: mask dimensions differ");
  double sum = 0.0;
  std::size_t n = 0;
  for (int y = 0; y < a.height(); ++y)
    for (int x = 0; x < a.width(); ++x) {
      if (mask && mask->at(x, y) == 0)
        continue;
      for (int c = 0; c < 3; ++c) {
        const double d = a.at(x, y, c) - b.at(x, y, c);
        sum += d * d;
      }
      n += 3;
    }
  return n == 0 ? 0.0 : sum / static_cast<double>(n);
}

double psnr(const ImageBuffer &a, const ImageBuffer &b, const MaskBuffer *mask) {
  const double e = mse(a, b, mask);
  if (e == 0.0)
    return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(1.0 / e);
}

EvalReport eval_views(const GaussianScene &scene, const std::vector<FrameTarget> &targets, const Rgb &background,
                      const std::vector<std::string> &names, const RenderOptions &opts) {
  if (targets.empty())
    throw std::invalid_argument("eval_views: no target views");
  if (!names.empty() && names.size() != targets.size())
    throw std::invalid_argument("eval_views: names and targets differ in length");

  EvalReport report;
  double l1_sum = 0.0;
  double psnr_sum = 0.0;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    targets[i].validate();
    const ImageBuffer img = render(scene, targets[i].camera, background, opts).color;
    ViewEval v;
    v.name = names.empty() ? "view_" + std::to_string(i) : names[i];
    v.l1 = rgb_loss(img, targets[i].target);
    v.psnr = psnr(img, targets[i].target);
    v.psnr_infinite = std::isinf(v.psnr);
    l1_sum += v.l1;
    if (v.psnr_infinite)
      report.mean_psnr_infinite = true;
    else
      psnr_sum += v.psnr;
    report.views.push_back(v);
  }
  const double n = static_cast<double>(targets.size());
  report.mean_l1 = l1_sum / n;
  report.mean_psnr = report.mean_psnr_infinite ? std::numeric_limits<double>::infinity() : psnr_sum / n;
  return report;
}

std::string EvalReport::to_json() const {
  nlohmann::json j;
  j["views"] = nlohmann::json::array();
  for (const ViewEval &v : views) {
    j["views"].push_back({{"name", v.name},
                          {"l1", v.l1},
                          {"psnr_db", v.psnr_infinite ? nlohmann::json() : nlohmann::json(v.psnr)},
                          {"psnr_infinite", v.psnr_infinite}});
  }
  j["mean_l1"] = mean_l1;
  j["mean_psnr_db"] = mean_psnr_infinite ? nlohmann::json() : nlohmann::json(mean_psnr);
  j["mean_psnr_infinite"] = mean_psnr_infinite;
  return j.dump(2) + "\n";
}

} // namespace dreamsplat
