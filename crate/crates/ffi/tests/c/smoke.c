#include <stdio.h>
#include <string.h>

#include "polyclinch.h"

static const char *TIGHT =
    "{\"epsilon\":\"1/2\","
    "\"buyers\":[{\"id\":\"1\",\"valuation\":\"3/2\",\"bid\":\"3/2\",\"budget\":\"inf\"},"
    "{\"id\":\"2\",\"valuation\":\"3\",\"bid\":\"3\",\"budget\":\"1\"}],"
    "\"sellers\":[{\"id\":\"1\",\"valuation\":\"1\",\"bid\":\"1\","
    "\"capacity\":{\"kind\":\"rank\",\"unit\":\"1\",\"cap\":\"1\"}}],"
    "\"edges\":[[\"1\",\"1\"],[\"2\",\"1\"]]}";

static int failures = 0;

static void expect(int ok, const char *what) {
    if (!ok) {
        fprintf(stderr, "FAILED: %s\n", what);
        failures++;
    }
}

static void expect_string(char *s, const char *want, const char *what) {
    expect(s != NULL && strcmp(s, want) == 0, what);
    pc_string_free(s);
}

int main(void) {
    pc_instance *inst = NULL;
    expect(pc_instance_from_json(TIGHT, &inst) == PC_STATUS_OK, "parse");
    expect(pc_instance_buyer_count(inst) == 2, "buyer count");
    expect(pc_instance_seller_count(inst) == 1, "seller count");

    pc_outcome *out = NULL;
    expect(pc_run_auction(inst, &out) == PC_STATUS_OK, "run");
    char *goods = NULL, *payment = NULL;
    expect(pc_outcome_buyer(out, 1, &goods, &payment) == PC_STATUS_OK, "buyer 2");
    expect_string(goods, "1", "buyer 2 goods");
    expect_string(payment, "1", "buyer 2 payment");

    char *lw = NULL;
    expect(pc_outcome_liquid_welfare(out, &lw) == PC_STATUS_OK, "liquid welfare");
    expect_string(lw, "1", "liquid welfare value");
    char *opt = NULL;
    expect(pc_optimal_liquid_welfare(inst, &opt) == PC_STATUS_OK, "optimum");
    expect_string(opt, "2", "optimum value");

    char *json = NULL;
    expect(pc_outcome_json(out, &json) == PC_STATUS_OK, "outcome json");
    expect(json != NULL && strstr(json, "\"liquid_welfare\":\"1\"") != NULL, "json content");
    pc_string_free(json);

    char *report = NULL;
    int code = -1;
    expect(pc_verify(inst, &report, &code) == PC_STATUS_OK, "verify");
    expect(code == 0, "verify exit code");
    pc_string_free(report);

    expect(pc_outcome_buyer(out, 7, &goods, &payment) == PC_STATUS_OUT_OF_RANGE, "range");
    expect(pc_last_error() != NULL, "range message");

    pc_instance *bad = NULL;
    expect(pc_instance_from_json("{\"buyers\": 3}", &bad) == PC_STATUS_PARSE, "parse error");
    expect(bad == NULL, "no handle on failure");
    expect(strstr(pc_last_error(), "$.buyers") != NULL, "error names the field");
    expect(pc_run_auction(NULL, &out) == PC_STATUS_NULL_ARGUMENT, "null instance");

    pc_outcome_free(out);
    pc_instance_free(inst);
    if (failures == 0) {
        printf("ok %s\n", pc_version());
    }
    return failures == 0 ? 0 : 1;
}
