#include "finola/masking.hpp"

#include <map>
#include <string>

namespace finola {

QuadrantMask build_mask(int width, int height, GridPos offset) {
  if (width < 2 || height < 2 || width % 2 != 0 || height % 2 != 0)
    throw ConfigError("build_mask: grid must be even-sized, got " + std::to_string(width) + "x" +
                      std::to_string(height));
  QuadrantMask mask;
  mask.width = width;
  mask.height = height;
  mask.block_w = width / 2;
  mask.block_h = height / 2;
  mask.offset = offset;
  if (offset.x < 0 || offset.x > mask.block_w || offset.y < 0 || offset.y > mask.block_h)
    throw PositionOutOfRangeError("build_mask: offset (" + std::to_string(offset.x) + "," +
                                  std::to_string(offset.y) + ") leaves the grid");

  const bool touch_x = offset.x == 0 || offset.x == mask.block_w;
  const bool touch_y = offset.y == 0 || offset.y == mask.block_h;
  mask.location_class = touch_x && touch_y  ? LocationClass::corner
                        : touch_x || touch_y ? LocationClass::edge
                                             : LocationClass::middle;

  // Group cells by the sign pattern of their wrap-around offsets; the pattern
  // is constant along any axis on which the block touches a grid edge.
  std::map<std::pair<int, int>, std::vector<GridPos>> by_offsets;
  for (int y = offset.y; y < offset.y + mask.block_h; ++y)
    for (int x = offset.x; x < offset.x + mask.block_w; ++x) {
      const int dx = x + mask.block_w < width ? mask.block_w : -mask.block_w;
      const int dy = y + mask.block_h < height ? mask.block_h : -mask.block_h;
      by_offsets[{dx, dy}].push_back({x, y});
    }
  for (auto& [key, cells] : by_offsets)
    mask.groups.push_back({key.first, key.second, std::move(cells)});
  return mask;
}

QuadrantMask sample_mask(int width, int height, std::mt19937_64& rng) {
  if (width < 2 || height < 2 || width % 2 != 0 || height % 2 != 0)
    throw ConfigError("sample_mask: grid must be even-sized");
  std::uniform_int_distribution<int> dx(0, width / 2);
  std::uniform_int_distribution<int> dy(0, height / 2);
  const int ox = dx(rng);
  const int oy = dy(rng);
  return build_mask(width, height, {ox, oy});
}

FeatureMap predict_masked(const FeatureMap& z_unmasked, const QuadrantMask& mask,
                          const FinolaParams& p) {
  if (z_unmasked.width != mask.width || z_unmasked.height != mask.height)
    throw ShapeMismatchError("predict_masked: map does not match mask grid");
  if (z_unmasked.channels != p.channels())
    throw ShapeMismatchError("predict_masked: map has " + std::to_string(z_unmasked.channels) +
                             " channels, params " + std::to_string(p.channels()));
  FeatureMap out(mask.width, mask.height, z_unmasked.channels);
  for (const auto& group : mask.groups) {
    const StepDir horizontal = group.dx > 0 ? StepDir::right : StepDir::left;
    const StepDir vertical = group.dy > 0 ? StepDir::down : StepDir::up;
    for (const GridPos cell : group.cells) {
      const Vector<double> source = z_unmasked.at(cell.x, cell.y);
      const Vector<double> across = step<double>(source, horizontal, p);
      out.at(cell.x + group.dx, cell.y) = across;
      out.at(cell.x, cell.y + group.dy) = step<double>(source, vertical, p);
      out.at(cell.x + group.dx, cell.y + group.dy) = step<double>(across, vertical, p);
    }
  }
  return out;
}

FeatureMap mask_to_image(const QuadrantMask& mask) {
  FeatureMap img(mask.width, mask.height, 1);
  for (int y = 0; y < mask.height; ++y)
    for (int x = 0; x < mask.width; ++x) img.at(x, y)[0] = mask.is_unmasked(x, y) ? 1.0 : 0.0;
  return img;
}

}  // namespace finola
