/* The public header must compile as C. */
#include <stdio.h>
#include <string.h>

#include "phononet/phononet.h"

int main(void) {
  phn_material m;
  phn_context* ctx = NULL;
  double lambda = 0.0, mu = 0.0;
  char* json = NULL;
  int failures = 0;

  phn_material_diamond(&m);
  if (phn_lame(&m, &lambda, &mu) != PHN_OK || !(mu > 0.0)) ++failures;
  if (phn_context_new(&ctx) != PHN_OK) return 1;
  /* Zeroed geometry is rejected. */
  if (phn_layout(ctx, &json, NULL) != PHN_ERR_GEOMETRY) ++failures;
  if (strlen(phn_last_error()) == 0) ++failures;
  phn_context_free(ctx);
  phn_string_free(json);
  printf("%s\n", failures ? "FAIL" : "ok");
  return failures;
}
