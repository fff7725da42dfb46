"""Regenerates the CSV fixtures. Output is deterministic."""
import csv
import os
import random

HERE = os.path.dirname(os.path.abspath(__file__))


def write(path, header, rows):
    with open(os.path.join(HERE, path), "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def cars():
    rng = random.Random(7)
    brands = {
        "Ford": ["Focus", "Fiesta", "Mustang", "Ranger", "Kuga"],
        "Toyota": ["Corolla", "Camry", "Prius", "Yaris", "Rav4"],
        "Honda": ["Civic", "Accord", "Jazz", "Pilot", "Odyssey"],
        "BMW": ["X5", "X3", "M3", "I3", "Z4"],
        "Audi": ["A3", "A4", "A6", "Q5", "Q7"],
    }
    growth = {"Ford": 1.02, "Toyota": 1.06, "Honda": 0.97, "BMW": 1.04, "Audi": 1.01}
    rows = []
    for year in range(2007, 2018):
        for brand, models in brands.items():
            for i, model in enumerate(models):
                base = 42000 + 9000 * i + (15000 if brand == "Toyota" else 0)
                value = base * growth[brand] ** (year - 2007) * rng.uniform(0.85, 1.15)
                rows.append([year, round(value, 1), model, brand])
    write("cars.csv", ["year", "sales", "model", "brand"], rows)


def books():
    rng = random.Random(11)
    words = ["Silent", "Tide", "Golden", "River", "Hidden", "Garden", "Winter", "Road",
             "Paper", "Moon", "Glass", "House", "Wild", "Heart", "Last", "Light"]
    rows = []
    n = 0
    for year in range(2009, 2020):
        for j in range(10):
            n += 1
            title = "%s %s %d" % (rng.choice(words), rng.choice(words), n)
            genre = "Fiction" if (j % 2 == 0) else "Non Fiction"
            rating = round(rng.uniform(3.9, 4.9), 1)
            reviews = int(rng.uniform(12000, 60000) * (1.4 if year == 2014 else 1.0))
            price = int(rng.uniform(4, 30) + (6 if genre == "Non Fiction" else 0))
            rows.append([title, rating, reviews, price, year, genre])
    write("books.csv", ["book", "user rating", "reviews", "price", "year", "genre"], rows)


def retail():
    rng = random.Random(23)
    regions = ["North", "South", "East", "West"]
    products = ["Chairs", "Tables", "Lamps"]
    rows = []
    for month in range(1, 13):
        for region in regions:
            for product in products:
                revenue = round(rng.uniform(20000, 90000), 2)
                units = int(revenue / rng.uniform(40, 120))
                rows.append(["2021-%02d-01" % month, region, product, revenue, units])
    write("retail.csv", ["date", "region", "product", "revenue", "units"], rows)


def toy():
    rows = [["A", 2019, 4], ["A", 2020, 6], ["B", 2019, 10], ["B", 2020, 20],
            ["C", 2019, 5], ["C", 2020, 15]]
    write("toy_brands.csv", ["brand", "year", "sales"], rows)


def small():
    cats = [("region", ["North", "South", "East", "West", "Central"]),
            ("team", ["Red", "Blue", "Green"]),
            ("segment", ["Retail", "Online"]),
            ("city", ["Paris", "Lyon", "Nice", "Lille", "Metz", "Brest"])]
    nums = ["profit", "cost", "revenue", "visits", "score", "weight"]
    for t in range(10):
        rng = random.Random(100 + t)
        ncat = 1 + t % 2
        nnum = 2 + (t % 3 == 0)
        chosen_cats = rng.sample(cats, ncat)
        chosen_nums = rng.sample(nums, nnum)
        nrows = rng.randint(20, 50)
        header = ["year"] + [c for c, _ in chosen_cats] + chosen_nums
        rows = []
        for r in range(nrows):
            row = [2000 + rng.randint(0, 7)]
            row += [rng.choice(vals) for _, vals in chosen_cats]
            for k, _ in enumerate(chosen_nums):
                v = rng.uniform(10, 500) * (1 + k)
                if rng.random() < 0.04:
                    v *= 12
                row.append(round(v, 2))
            rows.append(row)
        write("small/t%02d.csv" % (t + 1), header, rows)


if __name__ == "__main__":
    cars()
    books()
    retail()
    toy()
    small()
