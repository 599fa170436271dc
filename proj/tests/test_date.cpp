#include <gtest/gtest.h>

#include <boost/date_time/gregorian/gregorian.hpp>

#include "adpredict/date.hpp"
#include "test_support.hpp"

using adpredict::Date;

TEST(Date, ParseAndFormatRoundTrip) {
    const Date d = Date::parse("2016-06-01");
    EXPECT_EQ(d.year(), 2016);
    EXPECT_EQ(d.month(), 6u);
    EXPECT_EQ(d.day(), 1u);
    EXPECT_EQ(d.str(), "2016-06-01");
}

TEST(Date, RejectsMalformedText) {
    EXPECT_THROW(Date::parse("2016-6-1"), adpredict::DataError);
    EXPECT_THROW(Date::parse("2016-02-30"), adpredict::DataError);
    EXPECT_THROW(Date::parse("2016-06-01x"), adpredict::DataError);
    EXPECT_THROW(Date::ymd(2015, 2, 29), adpredict::ArgumentError);
}

// Day numbering checked against Boost.Gregorian on random dates.
TEST(Date, DayCountMatchesGregorianOracle) {
    testgen::Rng rng(11);
    const boost::gregorian::date epoch(1970, 1, 1);
    for (int t = 0; t < 2000; ++t) {
        const int y = testgen::uniform_int(rng, 1900, 2100);
        const int m = testgen::uniform_int(rng, 1, 12);
        const boost::gregorian::date last = boost::gregorian::date(y, m, 1).end_of_month();
        const int d = testgen::uniform_int(rng, 1, last.day());
        const Date ours = Date::ymd(y, m, d);
        EXPECT_EQ(ours.days(), (boost::gregorian::date(y, m, d) - epoch).days());
        EXPECT_EQ(Date::parse(ours.str()), ours);
    }
}

TEST(Date, PlusYearsClampsLeapDay) {
    EXPECT_EQ(Date::ymd(2016, 2, 29).plus_years(1), Date::ymd(2017, 2, 28));
    EXPECT_EQ(Date::ymd(2016, 2, 29).plus_years(4), Date::ymd(2020, 2, 29));
    EXPECT_EQ(Date::ymd(2016, 6, 1).plus_years(-10), Date::ymd(2006, 6, 1));
}

TEST(Date, WholeYearsExamples) {
    EXPECT_EQ(adpredict::whole_years_between(Date::ymd(1940, 3, 1), Date::ymd(2010, 5, 1)), 70);
    EXPECT_EQ(adpredict::whole_years_between(Date::ymd(1940, 5, 2), Date::ymd(2010, 5, 1)), 69);
    EXPECT_EQ(adpredict::whole_years_between(Date::ymd(1940, 5, 1), Date::ymd(2010, 5, 1)), 70);
    // Leap-day birthdays advance on Feb 28 in common years.
    EXPECT_EQ(adpredict::whole_years_between(Date::ymd(1940, 2, 29), Date::ymd(2011, 2, 28)), 71);
}

TEST(Date, WholeYearsMatchesCalendarRule) {
    testgen::Rng rng(12);
    int checked = 0;
    while (checked < 5000) {
        const Date a = testgen::random_date(rng, Date::ymd(1920, 1, 1), Date::ymd(2020, 12, 31));
        const Date b = testgen::random_date(rng, a, Date::ymd(2030, 12, 31));
        if (a.month() == 2 && a.day() == 29) continue;
        int expect = b.year() - a.year();
        if (b.month() < a.month() || (b.month() == a.month() && b.day() < a.day())) --expect;
        ASSERT_EQ(adpredict::whole_years_between(a, b), expect) << a.str() << " -> " << b.str();
        ++checked;
    }
}

TEST(Date, FractionalYears) {
    EXPECT_DOUBLE_EQ(adpredict::years_between(Date::ymd(2000, 1, 1), Date::ymd(2000, 1, 1).plus_days(365 * 4 + 1)),
                     4.0);
}
