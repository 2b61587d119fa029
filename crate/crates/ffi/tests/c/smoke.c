#include <math.h>
#include <stdio.h>
#include <string.h>

#include "geoflow.h"

#define CHECK(call)                                                              \
  do {                                                                           \
    GfStatus s_ = (call);                                                        \
    if (s_ != GF_STATUS_OK) {                                                    \
      fprintf(stderr, "%s -> %d: %s\n", #call, (int)s_, gf_last_error_message()); \
      return 1;                                                                  \
    }                                                                            \
  } while (0)

int main(void) {
  enum { H = 6, W = 7 };
  double rgb[H * W * 3];
  double uv[H * W * 2];
  for (int i = 0; i < H * W; i++) {
    rgb[3 * i] = rgb[3 * i + 1] = rgb[3 * i + 2] = (double)((i * 37) % 11) / 10.0;
    uv[2 * i] = 1.0;
    uv[2 * i + 1] = -0.5;
  }

  GfImage *img = NULL;
  GfFlow *fwd = NULL, *bwd = NULL, *grad = NULL;
  CHECK(gf_image_new(H, W, rgb, &img));
  CHECK(gf_flow_new(H, W, uv, &fwd));
  for (int i = 0; i < H * W * 2; i++) uv[i] = -uv[i];
  CHECK(gf_flow_new(H, W, uv, &bwd));

  double inter = -1.0;
  CHECK(gf_non_intersection_loss(img, fwd, NULL, &inter, &grad));
  if (inter != 0.0) return 2;

  size_t crossings = 99;
  CHECK(gf_crossing_count(fwd, NULL, &crossings));
  if (crossings != 0) return 3;

  GfLossConfig cfg = gf_loss_config_default();
  GfLossTerms terms;
  CHECK(gf_total_loss(img, img, fwd, bwd, &cfg, &terms));
  if (!(terms.total >= 0.0)) return 4;

  GfEvalResult eval;
  CHECK(gf_epe(fwd, fwd, NULL, NULL, &eval));
  if (eval.epe_mean != 0.0 || !isnan(eval.epe_mean_noc) || eval.valid_count != H * W) return 5;

  GfFlow *bad = NULL;
  if (gf_flow_new(0, W, uv, &bad) != GF_STATUS_INVALID_ARGUMENT) return 6;
  if (strlen(gf_last_error_message()) == 0) return 7;

  gf_flow_free(grad);
  gf_flow_free(bwd);
  gf_flow_free(fwd);
  gf_image_free(img);
  printf("geoflow %s ok\n", gf_version());
  return 0;
}
