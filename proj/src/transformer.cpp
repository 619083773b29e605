#include "adaptsplat/transformer.hpp"

#include <cmath>

#include "adaptsplat/errors.hpp"

namespace adaptsplat {

namespace {

Tensor columns(const Tensor& x, std::size_t begin, std::size_t end) {
  if (begin == 0 && end == x.dim(1)) return x;
  return transpose(slice(transpose(x), begin, end));
}

}  // namespace

void TokenGrid::validate() const {
  if (!tokens.defined() || tokens.ndim() != 2 || views == 0 ||
      tokens.dim(0) != views * grid_h * grid_w) {
    throw ShapeError("token grid: buffer " + (tokens.defined() ? shape_str(tokens.shape()) : "[]") +
                     " does not hold " + std::to_string(views) + " views of " +
                     std::to_string(grid_h) + "x" + std::to_string(grid_w) + " tokens");
  }
}

Tensor TokenGrid::view_map(std::size_t v) const {
  validate();
  if (v >= views) throw ArgumentError("token grid: view index out of range");
  const std::size_t n = per_view();
  return rows_to_channels(slice(tokens, v * n, (v + 1) * n), grid_h, grid_w);
}

TokenGrid to_tokens(const std::vector<Tensor>& maps) {
  if (maps.empty()) throw ArgumentError("to_tokens: no views");
  TokenGrid g;
  g.views = maps.size();
  g.grid_h = maps[0].dim(1);
  g.grid_w = maps[0].dim(2);
  std::vector<Tensor> rows;
  for (const auto& m : maps) {
    if (m.shape() != maps[0].shape()) {
      throw ShapeError("to_tokens: view maps " + shape_str(m.shape()) + " vs " +
                       shape_str(maps[0].shape()));
    }
    rows.push_back(channels_to_rows(m));
  }
  g.tokens = concat(rows);
  return g;
}

Tensor prior_attention(const Tensor& q, const Tensor& k, const Tensor& v, const Tensor& f_hf,
                       std::size_t heads, std::vector<Tensor>* weights) {
  if (q.ndim() != 2 || q.shape() != k.shape() || q.shape() != v.shape()) {
    throw ShapeError("attention: q " + shape_str(q.shape()) + ", k " + shape_str(k.shape()) +
                     ", v " + shape_str(v.shape()));
  }
  const std::size_t d = q.dim(1);
  if (heads == 0 || d % heads) {
    throw ArgumentError("attention: width " + std::to_string(d) + " not divisible by " +
                        std::to_string(heads) + " heads");
  }
  Tensor qe = q, ke = k;
  if (f_hf.defined()) {
    if (f_hf.shape() != q.shape()) {
      throw ShapeError("attention: prior " + shape_str(f_hf.shape()) + " vs tokens " +
                       shape_str(q.shape()));
    }
    qe = add(q, f_hf);
    ke = add(k, f_hf);
  }
  const std::size_t dh = d / heads;
  const double inv = 1.0 / std::sqrt(static_cast<double>(dh));
  std::vector<Tensor> outs;
  for (std::size_t h = 0; h < heads; ++h) {
    const auto qh = columns(qe, h * dh, (h + 1) * dh);
    const auto kh = columns(ke, h * dh, (h + 1) * dh);
    const auto vh = columns(v, h * dh, (h + 1) * dh);
    const auto w = softmax(scale(matmul(qh, transpose(kh)), inv), 1);
    if (weights) weights->push_back(w);
    outs.push_back(matmul(w, vh));
  }
  return heads == 1 ? outs[0] : concat(outs, 1);
}

AttentionBlock::AttentionBlock(ParamStore& ps, const std::string& name, const ModelConfig& cfg)
    : wq(Linear::make(ps, name + ".wq", cfg.d_model, cfg.d_model)),
      wk(Linear::make(ps, name + ".wk", cfg.d_model, cfg.d_model)),
      wv(Linear::make(ps, name + ".wv", cfg.d_model, cfg.d_model)),
      wo(Linear::make(ps, name + ".wo", cfg.d_model, cfg.d_model)),
      ffn1(Linear::make(ps, name + ".ffn1", cfg.d_model, cfg.ffn_hidden)),
      ffn2(Linear::make(ps, name + ".ffn2", cfg.ffn_hidden, cfg.d_model)),
      ln1(Norm::make(ps, name + ".ln1", cfg.d_model)),
      ln2(Norm::make(ps, name + ".ln2", cfg.d_model)),
      heads(cfg.heads) {}

TokenGrid AttentionBlock::operator()(const TokenGrid& x, const Tensor& f_hf, Fusion fusion) const {
  x.validate();
  if (f_hf.defined() && f_hf.shape() != x.tokens.shape()) {
    throw ShapeError("attention block: prior " + shape_str(f_hf.shape()) + " vs tokens " +
                     shape_str(x.tokens.shape()));
  }
  const bool use = f_hf.defined() && fusion != Fusion::none;
  Tensor h = ln1.rows(x.tokens);
  if (use && fusion == Fusion::add) h = add(h, f_hf);
  const Tensor a = prior_attention(wq(h), wk(h), wv(h), use && fusion == Fusion::pe ? f_hf : Tensor(),
                                   heads);
  TokenGrid out = x;
  out.tokens = add(x.tokens, wo(a));
  out.tokens = add(out.tokens, ffn2(relu(ffn1(ln2.rows(out.tokens)))));
  return out;
}

MultiViewTransformer::MultiViewTransformer(ParamStore& ps, const ModelConfig& cfg)
    : embed_(Linear::make(ps, "transformer.embed", cfg.widths[3], cfg.d_model)),
      out_norm_(Norm::make(ps, "transformer.out_norm", cfg.d_model)) {
  for (std::size_t b = 0; b < cfg.blocks; ++b) {
    blocks_.emplace_back(ps, "transformer.block" + std::to_string(b), cfg);
  }
}

TokenGrid MultiViewTransformer::forward(const std::vector<Tensor>& deep,
                                        const std::vector<HighFreqPrior>& priors,
                                        Fusion fusion) const {
  TokenGrid x = to_tokens(deep);
  x.tokens = embed_(x.tokens);
  Tensor f;
  if (!priors.empty()) {
    if (priors.size() != deep.size()) throw ShapeError("transformer: one prior per view required");
    std::vector<Tensor> maps;
    for (const auto& p : priors) {
      if (p.f_hf.ndim() != 3 || p.f_hf.dim(1) != x.grid_h || p.f_hf.dim(2) != x.grid_w) {
        throw ShapeError("transformer: prior grid " + shape_str(p.f_hf.shape()) +
                         " vs token grid " + std::to_string(x.grid_h) + "x" +
                         std::to_string(x.grid_w));
      }
      maps.push_back(p.f_hf);
    }
    f = to_tokens(maps).tokens;
  }
  for (const auto& b : blocks_) x = b(x, f, fusion);
  x.tokens = out_norm_.rows(x.tokens);
  return x;
}

}  // namespace adaptsplat
