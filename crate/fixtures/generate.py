#!/usr/bin/env python3
"""Writes every fixture knowledge base under this directory.

Run from anywhere: `python3 fixtures/generate.py`. Output is deterministic.
"""

import json
from pathlib import Path

ROOT = Path(__file__).resolve().parent


def write_kb(name, kb):
    out = ROOT / name
    out.mkdir(parents=True, exist_ok=True)
    for key in ("classes", "properties", "entities", "values", "cvt_schemas"):
        (out / f"{key}.json").write_text(json.dumps(kb.get(key, []), ensure_ascii=False, indent=2) + "\n")
    (out / "meta.json").write_text(json.dumps(kb.get("meta", {}), ensure_ascii=False, indent=2) + "\n")
    if "annotations" in kb:
        (out / "annotations.json").write_text(json.dumps(kb["annotations"], ensure_ascii=False, indent=2) + "\n")


def prop(pid, name, cls, parent=None, rng=None, triggers=(), infer_domain=False, infer_range=False):
    p = {"id": pid, "name": name, "domain_class": cls}
    if parent:
        p["parent"] = parent
    if rng:
        p["range"] = rng
    p["infer_domain"] = infer_domain
    p["infer_range"] = infer_range
    p["trigger_utterances"] = list(triggers)
    return p


def text():
    return {"kind": "simple", "builtin": "text"}


def cvt(schema):
    return {"kind": "cvt", "schema": schema}


def entity(eid, name, cls, aliases=(), member_of=(), rep=False):
    return {
        "id": eid,
        "name": name,
        "aliases": list(aliases),
        "instance_of": cls,
        "member_of": list(member_of),
        "is_class_representative": rep,
    }


def simple(eid, pid, value, tips=None):
    v = {"entity_id": eid, "leaf_property_id": pid, "value": {"kind": "simple", "value": value}}
    if tips:
        v["tips"] = tips
    return v


def table(eid, pid, schema, rows, tips=None):
    v = {"entity_id": eid, "leaf_property_id": pid, "value": {"kind": "cvt_table", "schema_id": schema, "rows": rows}}
    if tips:
        v["tips"] = tips
    return v


def kv(eid, pid, entries):
    return {
        "entity_id": eid,
        "leaf_property_id": pid,
        "value": {"kind": "key_value_doc", "entries": [{"key": k, "body": b} for k, b in entries]},
    }


def column(name, role, domain, default=None):
    c = {"column_name": name, "role": role, "value_domain": domain}
    if default is not None:
        c["default"] = default
    return c


# Promotion tools: the Store-Bao excerpt.

def promotion_tool(with_definition):
    classes = [{"id": "Promotion_Tool", "name": "营销工具", "root_property_ids": ["discount_regulation"]}]
    props = [
        prop("discount_regulation", "优惠规则", "Promotion_Tool"),
        prop("discount_conjunction", "优惠叠加", "Promotion_Tool", parent="discount_regulation", rng=text(),
             triggers=["<E>能和其他优惠叠加吗", "<E>的优惠叠加规则"]),
        prop("discount_purchase_limitation", "限购规则", "Promotion_Tool", parent="discount_regulation", rng=text(),
             triggers=["<E>有没有限购", "<E>每人限购几件"]),
    ]
    entities = [entity("store_bao", "店铺宝", "Promotion_Tool", aliases=["Store-Bao"])]
    values = [
        simple("store_bao", "discount_conjunction", "店铺宝可与单品级优惠、跨店级优惠叠加，不可与其他店铺级优惠叠加。"),
        simple("store_bao", "discount_purchase_limitation", "店铺宝活动商品可设置每人限购件数，最高99件。"),
    ]
    if with_definition:
        classes[0]["root_property_ids"].append("tool_definition")
        props.append(prop("tool_definition", "定义", "Promotion_Tool", rng=text(), triggers=["<E>是什么", "什么是<E>"]))
        values.append(simple("store_bao", "tool_definition", "店铺宝是店铺级的满减满折营销工具 (三星级及以上卖家可用)。"))
    return classes, props, entities, values


# Promotion programs and the promotion methods that join them.

PROGRAMS = [("double_11", "双十一", ["Double 11"]), ("promo_618", "618", []), ("double_12", "双十二", ["Double 12"])]
METHODS = [("tao_flash_sale", "淘抢购", ["Tao Flash Sale"]), ("juhuasuan", "聚划算", ["Juhuasuan"])]


def promotion_program(full):
    roots = ["registration_process", "charge_regulation"]
    if full:
        roots += ["floor_price_inclusion", "activity_rules", "program_definition"]
    classes = [
        {"id": "Promotion_Program", "name": "营销活动", "root_property_ids": roots},
        {"id": "Promotion_Method", "name": "营销玩法", "root_property_ids": ["method_definition"]},
    ]
    props = [
        prop("registration_process", "报名流程", "Promotion_Program", rng=cvt("registration_table"),
             triggers=["怎么参加<E>的<E>", "<E>怎么报名", "<E>的报名流程是什么"]),
        prop("charge_regulation", "收费标准", "Promotion_Program", rng=cvt("charge_table"),
             triggers=["<E>的收费标准是什么", "<E>怎么收费", "参加<E>要交多少钱"]),
        prop("method_definition", "定义", "Promotion_Method", rng=text(), triggers=["<E>是什么", "什么是<E>"]),
    ]
    if full:
        props += [
            prop("floor_price_inclusion", "最低价计入", "Promotion_Program", rng=cvt("floor_price_table"),
                 triggers=["<E>是否计入<E>最低价", "<E>的价格算不算<E>最低价"]),
            prop("activity_rules", "活动规则", "Promotion_Program", rng={"kind": "key_value_doc"},
                 triggers=["<E>的活动规则", "<E>有什么规则"]),
            prop("program_definition", "定义", "Promotion_Program", rng=text(), triggers=["<E>是什么", "什么是<E>"]),
        ]
    schemas = [
        {"id": "registration_table", "columns": [
            column("promo_method", "condition", "entity_ref"),
            column("answer", "answer", "text"),
        ]},
        {"id": "charge_table", "columns": [
            column("business_unit", "condition", "text"),
            column("merchant_rating", "condition", "text"),
            column("answer", "answer", "text"),
        ]},
    ]
    if full:
        schemas.append({"id": "floor_price_table", "columns": [
            column("subject_event", "condition", "entity_ref"),
            column("participated_goods", "condition", "boolean", default=True),
            column("answer", "answer", "text"),
        ]})
    entities = [entity(eid, name, "Promotion_Program", aliases=aliases) for eid, name, aliases in PROGRAMS]
    entities += [entity(eid, name, "Promotion_Method", aliases=aliases) for eid, name, aliases in METHODS]
    values = []
    for eid, name, _ in PROGRAMS:
        values.append(table(eid, "registration_process", "registration_table", [
            {"promo_method": "tao_flash_sale", "answer": f"在淘抢购后台选择{name}场次提交报名"},
            {"promo_method": "juhuasuan", "answer": f"在聚划算商家中心报名{name}专场"},
        ]))
        values.append(table(eid, "charge_regulation", "charge_table", [
            {"business_unit": unit, "merchant_rating": rating, "answer": f"{name}{unit}{rating}商家{fee}"}
            for unit in ("天猫", "淘宝")
            for rating, fee in (("三星级", "免收技术服务费"), ("一钻", "按成交额的2%收取技术服务费"))
        ]))
        if full:
            values.append(table(eid, "floor_price_inclusion", "floor_price_table", [
                {"subject_event": "tao_flash_sale", "participated_goods": True, "answer": "计入 (Yes)"},
                {"subject_event": "tao_flash_sale", "participated_goods": False, "answer": "不计入 (No)"},
                {"subject_event": "juhuasuan", "participated_goods": True, "answer": "计入 (Yes)"},
                {"subject_event": "juhuasuan", "participated_goods": False, "answer": "不计入 (No)"},
            ], tips=f"{name}最低价取报名前30天内的最低成交价，参与活动商品的玩法价格计入统计。"))
            values.append(kv(eid, "activity_rules", [
                ("报名时间", f"{name}报名于活动开始前一个月开放。"),
                ("商品要求", "近30天销量不少于10件，好评率不低于97%。"),
                ("发货要求", "活动订单须在48小时内发货。"),
            ]))
            values.append(simple(eid, "program_definition", f"{name}是平台级的年度大促活动。"))
    for eid, name, _ in METHODS:
        values.append(simple(eid, "method_definition", f"{name}是平台的限时营销玩法。"))
    return classes, props, entities, values, schemas


# Discount regulations: class-level knowledge linked to cognominal entities.

DISCOUNTS = [
    ("InStore_Discount", "in_store_discount", "店铺级优惠", "In-store Discount", "use_in_conjunction"),
    ("SKU_Discount", "sku_discount", "单品级优惠", "SKU Discount", "sku_use_in_conjunction"),
    ("InterStore_Discount", "inter_store_discount", "跨店级优惠", "Inter-store Discount", "interstore_use_in_conjunction"),
]
INSTANCES = [
    ("coupon", "优惠券", "Coupon", 0),
    ("in_store_red_packet", "店铺红包", "In-store Red Packet", 0),
    ("sku_bao", "单品宝", "SKU-Bao", 1),
    ("inter_store_full_reduction", "跨店满减", "Inter-store Full Reduction", 2),
]
# Whether row discount combines with column discount.
CONJUNCTION = {
    ("in_store_discount", "in_store_discount"): "NO",
    ("in_store_discount", "sku_discount"): "YES",
    ("in_store_discount", "inter_store_discount"): "YES",
    ("sku_discount", "in_store_discount"): "YES",
    ("sku_discount", "sku_discount"): "NO",
    ("sku_discount", "inter_store_discount"): "YES",
    ("inter_store_discount", "in_store_discount"): "YES",
    ("inter_store_discount", "sku_discount"): "YES",
    ("inter_store_discount", "inter_store_discount"): "NO",
}


def discounts():
    classes, props, entities, values = [], [], [], []
    for cls, rep, name, latin, pid in DISCOUNTS:
        classes.append({"id": cls, "name": name, "root_property_ids": [pid]})
        props.append(prop(pid, "是否可以叠加", cls, rng=cvt("conjunction_regulation"),
                          triggers=["<E>和<E>能不能一起使用", "<E>可以和<E>叠加吗", "<E>能否与<E>同时使用"],
                          infer_domain=True, infer_range=True))
        entities.append(entity(rep, name, cls, aliases=[latin], rep=True))
        values.append(table(rep, pid, "conjunction_regulation", [
            {"other_discount": other, "answer": CONJUNCTION[(rep, other)]} for _, other, _, _, _ in DISCOUNTS
        ]))
    for eid, name, latin, k in INSTANCES:
        cls, rep = DISCOUNTS[k][0], DISCOUNTS[k][1]
        entities.append(entity(eid, name, cls, aliases=[latin], member_of=[rep]))
    schemas = [{"id": "conjunction_regulation", "columns": [
        column("other_discount", "condition", "entity_ref"),
        column("answer", "answer", "text"),
    ]}]
    return classes, props, entities, values, schemas


def fig2():
    classes, props, entities, values = promotion_tool(with_definition=False)
    return {"classes": classes, "properties": props, "entities": entities, "values": values, "meta": {}}


def fig5():
    classes, props, entities, values, schemas = promotion_program(full=False)
    return {
        "classes": classes, "properties": props, "entities": entities, "values": values,
        "cvt_schemas": schemas, "meta": {},
        "annotations": [
            {"question": "怎么参加淘抢购的双十一", "status": "answered", "topic_entity": "double_11",
             "leaf": "registration_process", "constraints": {"promo_method": "tao_flash_sale"}},
        ],
    }


def fig6():
    classes, props, entities, values, schemas = discounts()
    return {
        "classes": classes, "properties": props, "entities": entities, "values": values,
        "cvt_schemas": schemas, "meta": {},
        "annotations": [
            {"question": "优惠券和单品宝能不能一起使用", "status": "answered", "topic_entity": "coupon",
             "leaf": "use_in_conjunction", "constraints": {"other_discount": "sku_bao"}},
        ],
    }


def fig7():
    c1, p1, e1, v1 = promotion_tool(with_definition=True)
    c2, p2, e2, v2, s2 = promotion_program(full=True)
    c3, p3, e3, v3, s3 = discounts()
    annotations = [
        {"question": "怎么参加淘抢购的双十一", "status": "answered", "topic_entity": "double_11",
         "leaf": "registration_process", "constraints": {"promo_method": "tao_flash_sale"}},
        {"question": "淘抢购是否计入双十一最低价", "status": "answered", "topic_entity": "double_11",
         "leaf": "floor_price_inclusion", "constraints": {"subject_event": "tao_flash_sale"}},
        {"question": "优惠券和单品宝能不能一起使用", "status": "answered", "topic_entity": "coupon",
         "leaf": "use_in_conjunction", "constraints": {"other_discount": "sku_bao"}},
        {"question": "店铺红包可以和优惠券叠加吗", "status": "answered", "topic_entity": "coupon",
         "leaf": "use_in_conjunction", "constraints": {"other_discount": "in_store_red_packet"}},
        {"question": "天猫三星级商家参加双十二的收费标准", "status": "answered", "topic_entity": "double_12",
         "leaf": "charge_regulation", "constraints": {"business_unit": "天猫", "merchant_rating": "三星级"}},
        {"question": "双十一的活动规则", "status": "answered", "topic_entity": "double_11",
         "leaf": "activity_rules", "constraints": {}},
        {"question": "店铺宝能和其他优惠叠加吗", "status": "answered", "topic_entity": "store_bao",
         "leaf": "discount_conjunction", "constraints": {}},
        {"question": "淘抢购是什么", "status": "answered", "topic_entity": "tao_flash_sale",
         "leaf": "method_definition", "constraints": {}},
        {"question": "Store-Bao有没有限购", "status": "answered", "topic_entity": "store_bao",
         "leaf": "discount_purchase_limitation", "constraints": {}},
        {"question": "618", "status": "recommended"},
        {"question": "优惠规则", "status": "recommended"},
    ]
    return {
        "classes": c1 + c2 + c3, "properties": p1 + p2 + p3, "entities": e1 + e2 + e3,
        "values": v1 + v2 + v3, "cvt_schemas": s2 + s3, "meta": {}, "annotations": annotations,
    }


def scenario(entity_count, leaf_count, cvt_count, qa_count, class_count):
    """Synthetic KB with the given counts. Leaves are spread over classes
    as evenly as possible; every fourth class groups its leaves under one
    internal root, which does not count as a property."""
    classes, props, entities, values = [], [], [], []
    schemas = [{"id": "generic_table", "columns": [
        column("condition", "condition", "text"),
        column("answer", "answer", "text"),
    ]}]
    per_class = [leaf_count // class_count + (1 if i < leaf_count % class_count else 0) for i in range(class_count)]
    leaf_index = 0
    for c, n in enumerate(per_class):
        cid = f"class_{c:02}"
        roots = []
        grouped = c % 4 == 0
        if grouped:
            roots.append(f"{cid}_group")
            props.append(prop(f"{cid}_group", f"类目{c}规则组", cid))
        for _ in range(n):
            pid = f"leaf_{leaf_index:03}"
            rng = cvt("generic_table") if leaf_index < cvt_count else text()
            props.append(prop(pid, f"属性{leaf_index}", cid, parent=f"{cid}_group" if grouped else None, rng=rng,
                              triggers=[f"<E>的属性{leaf_index}是什么"]))
            if not grouped:
                roots.append(pid)
            leaf_index += 1
        classes.append({"id": cid, "name": f"类目{c}", "root_property_ids": roots})
    for i in range(entity_count):
        c = i % class_count
        eid = f"entity_{i:03}"
        entities.append(entity(eid, f"实体{i}", f"class_{c:02}"))
        text_leaves = [p for p in props if p["domain_class"] == f"class_{c:02}" and p.get("range", {}).get("kind") == "simple"]
        if text_leaves:
            values.append(simple(eid, text_leaves[0]["id"], f"实体{i}的取值"))
    return {"classes": classes, "properties": props, "entities": entities, "values": values,
            "cvt_schemas": schemas, "meta": {"qa_count": qa_count}}


def main():
    write_kb("fig2", fig2())
    write_kb("fig5", fig5())
    write_kb("fig6", fig6())
    write_kb("fig7", fig7())
    write_kb("scenario1", scenario(35, 78, 9, 232, 7))
    write_kb("scenario2", scenario(111, 73, 27, 776, 9))
    write_kb("scenario3", scenario(367, 72, 45, 870, 12))


if __name__ == "__main__":
    main()
